// Copyright (C) 2026 The EchoGuide Authors
// SPDX-License-Identifier: Apache-2.0

#include "echoguide/pipeline/session.hpp"

#include <chrono>

#include <opencv2/imgproc.hpp>

#include "echoguide/error.hpp"
#include "echoguide/video_io.hpp"

namespace echoguide::pipeline {

using Clock = std::chrono::steady_clock;
using nlohmann::json;

CascadeModels CascadeModels::load(const CheckpointPaths& paths) {
    return {std::make_shared<landmarks::LandmarkDetector>(landmarks::LandmarkDetector::load(paths.landmarks)),
            std::make_shared<pose::PoseScorer>(pose::PoseScorer::load(paths.pose)),
            std::make_shared<lvef::LvefEstimator>(lvef::LvefEstimator::load(paths.lvef))};
}

json result_to_json(const GuidanceFrameResult& r) {
    json lm = json::array();
    for (const auto& p : r.landmarks) {
        lm.push_back({{"id", p.id}, {"x", p.x}, {"y", p.y}, {"radius", p.radius}, {"visible", p.visible}});
    }
    json lvef = nullptr;
    if (r.lvef) lvef = {{"value", r.lvef->value}, {"frame_range", {r.lvef->frame_range[0], r.lvef->frame_range[1]}}};
    return {{"type", "result"},
            {"frame_index", r.frame_index},
            {"category", std::string(to_string(r.category))},
            {"score", r.score.value()},
            {"latency_ms", r.latency_ms},
            {"dropped_count", r.dropped_count},
            {"landmarks", std::move(lm)},
            {"lvef", std::move(lvef)}};
}

Session::Session(CascadeModels models, SessionOptions options)
    : models_(std::move(models)), options_(std::move(options)), buffer_(options_.fps, options_.buffer_capacity) {}

GuidanceFrameResult Session::process_frame(const cv::Mat& frame) { return process_frame(frame, next_index_); }

GuidanceFrameResult Session::process_frame(const cv::Mat& input, std::size_t frame_index) {
    if (!models_.detector || !models_.scorer || !models_.estimator) {
        throw SessionError("session " + options_.session_id + " has no loaded models");
    }
    const auto start = Clock::now();
    cv::Mat frame = video::to_gray(input);
    const auto size = models_.detector->config().input_size();
    if (frame.size() != size) {
        if (!options_.resize_frames) {
            throw ShapeError("frame " + std::to_string(frame.cols) + "x" + std::to_string(frame.rows) +
                             " does not match the landmark checkpoint input " + std::to_string(size.width) + "x" +
                             std::to_string(size.height));
        }
        cv::resize(frame, frame, size, 0.0, 0.0, cv::INTER_AREA);
    }

    GuidanceFrameResult result;
    result.frame_index = frame_index;
    result.landmarks = models_.detector->predict(frame);
    const auto scored = models_.scorer->score(frame, result.landmarks);
    result.score = scored.score;
    result.category = pose::score_to_category(result.score);

    if (buffer_.update(result.category, frame, frame_index)) {
        const auto t0 = Clock::now();
        const auto& buffered = buffer_.frames();
        std::vector<cv::Mat> clip(buffered.begin(), buffered.end());
        result.lvef = models_.estimator->estimate(clip, options_.fps, options_.session_id,
                                                  std::array<std::size_t, 2>{buffer_.first_index(), buffer_.last_index()});
        lvef_seconds_ += std::chrono::duration<double>(Clock::now() - t0).count();
    }
    next_index_ = frame_index + 1;
    result.latency_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    return result;
}

ThroughputStats measure_throughput(Session& session, std::span<const cv::Mat> clip) {
    if (clip.empty()) throw PreconditionError("throughput needs at least one frame");
    const double lvef_before = session.lvef_seconds();
    const auto start = Clock::now();
    for (const auto& frame : clip) session.process_frame(frame);
    const double elapsed = std::chrono::duration<double>(Clock::now() - start).count();
    return make_throughput(clip.size(), elapsed, session.lvef_seconds() - lvef_before);
}

}  // namespace echoguide::pipeline
