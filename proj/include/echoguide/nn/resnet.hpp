// Copyright (C) 2026 The EchoGuide Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>

#include <torch/torch.h>

namespace echoguide::nn {

/// Scales a channel count by `width`, never below 4.
std::int64_t scaled_channels(std::int64_t base, double width);

struct BasicBlockImpl : torch::nn::Module {
    BasicBlockImpl(std::int64_t in, std::int64_t out, std::int64_t stride);
    torch::Tensor forward(const torch::Tensor& x);

    torch::nn::Conv2d conv1{nullptr}, conv2{nullptr};
    torch::nn::BatchNorm2d bn1{nullptr}, bn2{nullptr};
    torch::nn::Sequential downsample{nullptr};
};
TORCH_MODULE(BasicBlock);

struct ResNetEncoderOptions {
    int depth = 34;          // 18 or 34
    std::int64_t in_channels = 3;
    double width = 1.0;      // channel multiplier over 64/128/256/512
};

/// Residual encoder (basic blocks) downsampling by 32: stem conv + max-pool,
/// then four stages with strides 1, 2, 2, 2.
struct ResNetEncoderImpl : torch::nn::Module {
    explicit ResNetEncoderImpl(const ResNetEncoderOptions& options);

    /// (B, C_in, H, W) -> (B, C_out, H/32, W/32)
    torch::Tensor forward(const torch::Tensor& x);

    std::int64_t out_channels() const { return stage_channels.back(); }

    std::array<std::int64_t, 4> stage_channels{};
    torch::nn::Conv2d stem{nullptr};
    torch::nn::BatchNorm2d stem_bn{nullptr};
    torch::nn::MaxPool2d pool{nullptr};
    torch::nn::Sequential layer1{nullptr}, layer2{nullptr}, layer3{nullptr}, layer4{nullptr};
};
TORCH_MODULE(ResNetEncoder);

}  // namespace echoguide::nn
