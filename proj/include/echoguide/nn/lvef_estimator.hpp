// Copyright (C) 2026 The EchoGuide Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <opencv2/core.hpp>
#include <torch/torch.h>

#include "echoguide/clip_gate.hpp"
#include "echoguide/ingest.hpp"

namespace echoguide::lvef {

inline constexpr int kLvefSchemaVersion = 1;

struct LvefModelConfig {
    std::array<int, 4> blocks = {2, 2, 2, 2};  // residual blocks per stage
    double width_multiplier = 1.0;
    int clip_length = 32;
    int stride = 1;
    int input_height = 112;
    int input_width = 112;
    // Network output is raw * ef_scale + ef_offset, so training targets are
    // roughly unit scale.
    double ef_scale = 10.0;
    double ef_offset = 50.0;
    std::string model_version = "r2plus1d";

    cv::Size input_size() const { return {input_width, input_height}; }
    nlohmann::json to_json() const;
    static LvefModelConfig from_json(const nlohmann::json& j);
};

/// (1, k, k) spatial convolution to an intermediate width, then (t, 1, 1)
/// temporal convolution; the intermediate width keeps the parameter count of
/// the full (t, k, k) kernel.
struct SpatioTemporalConvImpl : torch::nn::Module {
    SpatioTemporalConvImpl(std::int64_t in, std::int64_t out, std::int64_t k, std::int64_t t,
                           std::int64_t spatial_stride, std::int64_t temporal_stride, std::int64_t mid = 0);
    torch::Tensor forward(const torch::Tensor& x);

    torch::nn::Conv3d spatial{nullptr}, temporal{nullptr};
    torch::nn::BatchNorm3d bn{nullptr};
};
TORCH_MODULE(SpatioTemporalConv);

/// Intermediate width t d^2 N_in N_out / (d^2 N_in + t N_out).
std::int64_t factorized_mid_channels(std::int64_t in, std::int64_t out, std::int64_t k, std::int64_t t);

struct VideoBlockImpl : torch::nn::Module {
    VideoBlockImpl(std::int64_t in, std::int64_t out, std::int64_t stride);
    torch::Tensor forward(const torch::Tensor& x);

    SpatioTemporalConv conv1{nullptr}, conv2{nullptr};
    torch::nn::BatchNorm3d bn1{nullptr}, bn2{nullptr};
    torch::nn::Sequential downsample{nullptr};
};
TORCH_MODULE(VideoBlock);

/// Factorized spatiotemporal residual network with a scalar regression head.
struct VideoRegressorImpl : torch::nn::Module {
    explicit VideoRegressorImpl(const LvefModelConfig& config);
    /// (B, 1 or 3, T, H, W) -> (B, 1) raw outputs.
    torch::Tensor forward(torch::Tensor x);

    SpatioTemporalConv stem{nullptr};
    torch::nn::BatchNorm3d stem_bn{nullptr};
    torch::nn::Sequential stages{nullptr};
    torch::nn::Linear fc{nullptr};
};
TORCH_MODULE(VideoRegressor);

struct LvefEstimate {
    double value = 0.0;  // percent, clamped to [0, 100]
    std::string clip_id;
    std::array<std::size_t, 2> frame_range{};  // inclusive
    std::string model_version;
};

/// {clip_id, frame_range: [start, end], lvef, model_version}
nlohmann::json lvef_report_json(const LvefEstimate& estimate);

/// Indices of the frames fed to the model: 0, stride, 2 stride, ... for
/// `length` entries, repeating the last available frame past the end.
std::vector<std::size_t> sample_clip_indices(std::size_t frame_count, int length, int stride);

class LvefEstimator {
public:
    explicit LvefEstimator(LvefModelConfig config);

    static LvefEstimator load(const std::filesystem::path& dir);
    void save(const std::filesystem::path& dir, const std::optional<nlohmann::json>& training = {});

    /// (C=1, T, H, W) tensor of the sampled, resized, normalized clip.
    torch::Tensor make_input(std::span<const cv::Mat> frames) const;

    /// Unclamped percent predictions for stacked inputs, shape (B,).
    torch::Tensor predict_percent(const torch::Tensor& inputs);

    /// Throws PreconditionError when the clip fails the gate.
    LvefEstimate estimate(std::span<const cv::Mat> frames, double fps, const std::string& clip_id = {},
                          std::optional<std::array<std::size_t, 2>> frame_range = {});

    const LvefModelConfig& config() const { return config_; }
    VideoRegressor& net() { return net_; }

private:
    LvefModelConfig config_;
    VideoRegressor net_{nullptr};
};

/// Clamps a raw percent to [0, 100]; non-finite values raise NumericError.
double clamp_lvef(double raw);

struct LvefSample {
    std::string clip_id;
    std::vector<cv::Mat> frames;
    double ef = 0.0;
};

struct LvefTrainConfig {
    int epochs = 100;
    int batch_size = 8;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
    int max_steps = 0;  // 0: no cap
};

struct LvefEpochLog {
    int epoch = 0;
    double train_loss = 0.0;
    std::optional<double> val_mae;
};

struct LvefTrainResult {
    std::vector<LvefEpochLog> epochs;
    std::vector<double> step_losses;
    nlohmann::json to_json() const;
};

/// Squared error on (prediction - ef) / ef_scale with Adam. Throws
/// PreconditionError on an empty training set.
LvefTrainResult train_lvef_estimator(LvefEstimator& estimator, std::span<const LvefSample> train,
                                     std::span<const LvefSample> val, const LvefTrainConfig& config,
                                     const std::function<void(const LvefEpochLog&)>& on_epoch = {});

/// Mean absolute error (percent points) of clamped predictions.
double lvef_mae(LvefEstimator& estimator, std::span<const LvefSample> samples);

/// Clips with frames loaded, optionally filtered by split.
std::vector<LvefSample> collect_lvef_samples(const ingest::EchoNetDataset& dataset,
                                             std::optional<ingest::Split> split = {});

}  // namespace echoguide::lvef
