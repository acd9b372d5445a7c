// Copyright (C) 2026 The EchoGuide Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <opencv2/core.hpp>
#include <torch/torch.h>

namespace echoguide::nn {

// Grayscale intensity normalization shared by every model input.
inline constexpr float kPixelMean = 0.449f;
inline constexpr float kPixelStd = 0.226f;

/// 8-bit grayscale frame -> normalized (1, H, W) float tensor, resized to
/// `size` when it differs.
torch::Tensor frame_to_tensor(const cv::Mat& frame, cv::Size size);

/// Stacks frames into (B, 1, H, W).
torch::Tensor frames_to_batch(std::span<const cv::Mat> frames, cv::Size size);

/// Seeds torch and turns on deterministic kernels.
void set_deterministic(std::uint64_t seed);

/// SHA-256 (hex) over the names and bytes of every parameter and buffer.
std::string parameter_digest(const torch::nn::Module& module);

/// Deep copy of parameters and buffers, for best-epoch restore.
std::vector<torch::Tensor> snapshot_state(const torch::nn::Module& module);
void restore_state(torch::nn::Module& module, const std::vector<torch::Tensor>& snapshot);

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& value);

/// True when every element is finite.
bool all_finite(const torch::Tensor& t);

}  // namespace echoguide::nn
