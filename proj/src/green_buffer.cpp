// Copyright (C) 2026 The EchoGuide Authors
// SPDX-License-Identifier: Apache-2.0

#include "echoguide/green_buffer.hpp"

#include <algorithm>

#include "echoguide/clip_gate.hpp"
#include "echoguide/error.hpp"

namespace echoguide::pipeline {

GreenBuffer::GreenBuffer(double fps, std::size_t capacity) : fps_(fps), capacity_(capacity) {
    if (!(fps > 0.0)) throw DomainError("green buffer fps must be positive");
    if (capacity == 0) throw DomainError("green buffer capacity must be positive");
}

void GreenBuffer::clear() {
    run_length_ = 0;
    last_fire_run_.reset();
    frames_.clear();
}

bool GreenBuffer::update(PoseCategory category, const cv::Mat& frame, std::size_t frame_index) {
    if (category != PoseCategory::green) {
        clear();
        return false;
    }
    ++run_length_;
    last_index_ = frame_index;
    if (!frame.empty()) {
        frames_.push_back(frame);
        if (frames_.size() > capacity_) frames_.pop_front();
    }

    bool fire = false;
    if (!last_fire_run_) {
        fire = lvef::gate_clip(run_length_, fps_);
    } else {
        fire = run_length_ - *last_fire_run_ >= lvef::kMinGateFrames;
    }
    if (fire) {
        last_fire_run_ = run_length_;
        ++emitted_count_;
    }
    return fire;
}

ThroughputStats make_throughput(std::size_t frames, double elapsed_seconds, double lvef_seconds) {
    using Clock = std::chrono::steady_clock;
    const double resolution = static_cast<double>(Clock::period::num) / static_cast<double>(Clock::period::den);
    ThroughputStats s;
    s.frames_processed = frames;
    s.elapsed_seconds = std::max(elapsed_seconds, resolution);
    s.fps = static_cast<double>(frames) / s.elapsed_seconds;
    s.lvef_seconds = lvef_seconds;
    return s;
}

}  // namespace echoguide::pipeline
