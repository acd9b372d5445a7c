// Copyright (C) 2026 The EchoGuide Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "echoguide/ingest.hpp"
#include "echoguide/nn/landmark_detector.hpp"
#include "echoguide/nn/lvef_estimator.hpp"
#include "echoguide/nn/pose_scorer.hpp"
#include "echoguide/pipeline/session.hpp"
#include "echoguide/service/protocol.hpp"

// Run configuration shared by the command-line tools. Every section is
// optional; model sections are patches over the built-in defaults and
// relative paths resolve against the config file's directory.
namespace echoguide::tools {

struct EchoNetPaths {
    std::filesystem::path file_list;
    std::filesystem::path tracings;
    std::optional<std::filesystem::path> aux_landmarks;
    std::optional<std::filesystem::path> video_dir;
    double default_fps = 50.0;
};

struct ServiceSettings {
    std::string address = "127.0.0.1";
    unsigned short port = 8765;
    double fps = 30.0;
    std::size_t buffer_capacity = 32;
    bool queue_all = false;
    bool resize_frames = false;
    std::optional<std::filesystem::path> log_dir;
};

struct RunConfig {
    std::uint64_t seed = 0;
    std::filesystem::path checkpoint_dir = "checkpoints";
    std::optional<EchoNetPaths> echonet;
    std::optional<std::filesystem::path> sweeps;

    landmarks::LandmarkModelConfig landmark_model;
    landmarks::LandmarkTrainConfig landmark_train;
    pose::PoseModelConfig pose_model;
    pose::PoseTrainConfig pose_train;
    std::uint64_t fold_seed = 0;
    lvef::LvefModelConfig lvef_model;
    lvef::LvefTrainConfig lvef_train;
    ServiceSettings service;

    pipeline::CheckpointPaths checkpoints() const {
        return {checkpoint_dir / "landmarks", checkpoint_dir / "pose", checkpoint_dir / "lvef"};
    }
};

RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
/// Defaults when `path` is empty.
RunConfig load_run_config(const std::filesystem::path& path);

/// Parses the EchoNet tables, merging auxiliary landmarks, and loads frames.
ingest::EchoNetDataset load_echonet(const RunConfig& config);
std::vector<ingest::SweepRecording> load_sweeps(const RunConfig& config);

}  // namespace echoguide::tools
