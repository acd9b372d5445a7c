// Copyright (C) 2026 The EchoGuide Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "echoguide/ingest.hpp"
#include "echoguide/nn/landmark_detector.hpp"
#include "echoguide/nn/pose_scorer.hpp"

namespace echoguide::pose {

/// Labelled frames of one sweep with interpolated continuous scores.
/// Landmarks come from `detector` (frame pixel space) when it is given.
std::vector<PoseSample> sweep_samples(const ingest::SweepRecording& sweep, landmarks::LandmarkDetector* detector);

struct CrossValidationConfig {
    PoseModelConfig model;
    PoseTrainConfig train;
    std::uint64_t fold_seed = 0;
    /// Per-fold checkpoints and reports go to <dir>/fold_<k> when set.
    std::optional<std::filesystem::path> output_dir;
};

struct FoldRun {
    FoldResult result;
    PoseTrainResult training;
    nlohmann::json report;
    std::size_t train_frames = 0;
    std::size_t val_frames = 0;
};

struct CrossValidationResult {
    std::vector<FoldRun> folds;
    nlohmann::json aggregate;
};

/// Subject-level 5-fold training and evaluation of one mode/architecture.
/// Throws PreconditionError when the mode needs landmarks and no detector
/// is given.
CrossValidationResult cross_validate_pose(std::span<const ingest::SweepRecording> sweeps,
                                          landmarks::LandmarkDetector* detector,
                                          const CrossValidationConfig& config,
                                          const std::function<void(const FoldRun&)>& on_fold = {});

}  // namespace echoguide::pose
