// Copyright (C) 2026 The EchoGuide Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstddef>
#include <deque>
#include <optional>

#include <opencv2/core.hpp>

#include "echoguide/rubric.hpp"

namespace echoguide::pipeline {

/// Run of consecutive green frames awaiting LVEF estimation.
///
/// The buffer fires the first time the run passes the clip gate and then once
/// per additional 26 green frames. Any non-green frame clears it. Only the
/// most recent `capacity` frames are retained for the estimator.
class GreenBuffer {
public:
    explicit GreenBuffer(double fps, std::size_t capacity = 32);

    /// Appends (green) or clears (otherwise). Returns true when the buffer fires.
    bool update(PoseCategory category, const cv::Mat& frame = {}, std::size_t frame_index = 0);

    std::size_t run_length() const { return run_length_; }
    std::size_t emitted_count() const { return emitted_count_; }
    double fps() const { return fps_; }

    const std::deque<cv::Mat>& frames() const { return frames_; }
    /// Frame indices [first, last] of the retained frames.
    std::size_t first_index() const { return last_index_ + 1 - frames_.size(); }
    std::size_t last_index() const { return last_index_; }

    void clear();

private:
    double fps_;
    std::size_t capacity_;
    std::size_t run_length_ = 0;
    std::size_t emitted_count_ = 0;
    std::optional<std::size_t> last_fire_run_;
    std::deque<cv::Mat> frames_;
    std::size_t last_index_ = 0;
};

/// Functional form: returns whether this frame fires.
inline bool update_green_buffer(GreenBuffer& buffer, PoseCategory category) {
    return buffer.update(category);
}

struct ThroughputStats {
    std::size_t frames_processed = 0;
    double elapsed_seconds = 0.0;
    double fps = 0.0;
    /// Time spent inside the LVEF estimator, reported separately.
    double lvef_seconds = 0.0;
};

/// fps = frames / elapsed, with elapsed clamped below by the steady clock's
/// resolution.
ThroughputStats make_throughput(std::size_t frames, double elapsed_seconds, double lvef_seconds = 0.0);

}  // namespace echoguide::pipeline
