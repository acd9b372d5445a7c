// Copyright (C) 2026 The EchoGuide Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <opencv2/core.hpp>

#include "echoguide/green_buffer.hpp"
#include "echoguide/landmark_ops.hpp"
#include "echoguide/nn/landmark_detector.hpp"
#include "echoguide/nn/lvef_estimator.hpp"
#include "echoguide/nn/pose_scorer.hpp"
#include "echoguide/pose_metrics.hpp"

namespace echoguide::pipeline {

struct CheckpointPaths {
    std::filesystem::path landmarks;
    std::filesystem::path pose;
    std::filesystem::path lvef;
};

/// One handle per model; a session owns its own set.
struct CascadeModels {
    std::shared_ptr<landmarks::LandmarkDetector> detector;
    std::shared_ptr<pose::PoseScorer> scorer;
    std::shared_ptr<lvef::LvefEstimator> estimator;

    static CascadeModels load(const CheckpointPaths& paths);
};

struct SessionOptions {
    std::string session_id = "session";
    double fps = 30.0;
    std::size_t buffer_capacity = 32;
    /// Resize frames to the detector input instead of rejecting them.
    bool resize_frames = false;
};

struct GuidanceFrameResult {
    std::size_t frame_index = 0;
    PoseCategory category = PoseCategory::green;
    pose::PoseScore score;
    std::vector<landmarks::LandmarkPrediction> landmarks;
    std::optional<lvef::LvefEstimate> lvef;
    double latency_ms = 0.0;
    std::size_t dropped_count = 0;
};

/// Wire form: {type:"result", frame_index, category, score, latency_ms,
/// dropped_count, landmarks:[{id, x, y, radius, visible}], lvef}.
nlohmann::json result_to_json(const GuidanceFrameResult& result);

/// Per-frame cascade: landmark detection and gating, pose scoring, green
/// buffering and LVEF estimation when the buffer fires.
class Session {
public:
    Session(CascadeModels models, SessionOptions options);

    /// Throws SessionError when a model is missing and ShapeError when the
    /// frame does not match the detector input (unless resizing is on).
    GuidanceFrameResult process_frame(const cv::Mat& frame, std::size_t frame_index);
    /// Uses the next sequential index.
    GuidanceFrameResult process_frame(const cv::Mat& frame);

    const GreenBuffer& buffer() const { return buffer_; }
    const SessionOptions& options() const { return options_; }
    /// Seconds spent inside the LVEF estimator so far.
    double lvef_seconds() const { return lvef_seconds_; }

private:
    CascadeModels models_;
    SessionOptions options_;
    GreenBuffer buffer_;
    std::size_t next_index_ = 0;
    double lvef_seconds_ = 0.0;
};

/// End-to-end frames per second over process_frame calls; model loading is
/// not timed. LVEF time is included in the total and reported separately.
ThroughputStats measure_throughput(Session& session, std::span<const cv::Mat> clip);

}  // namespace echoguide::pipeline
