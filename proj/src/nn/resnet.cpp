// Copyright (C) 2026 The EchoGuide Authors
// SPDX-License-Identifier: Apache-2.0

#include "echoguide/nn/resnet.hpp"

#include <algorithm>
#include <cmath>

#include "echoguide/error.hpp"

namespace echoguide::nn {

namespace tnn = torch::nn;

std::int64_t scaled_channels(std::int64_t base, double width) {
    return std::max<std::int64_t>(4, static_cast<std::int64_t>(std::lround(static_cast<double>(base) * width)));
}

BasicBlockImpl::BasicBlockImpl(std::int64_t in, std::int64_t out, std::int64_t stride) {
    conv1 = register_module("conv1", tnn::Conv2d(tnn::Conv2dOptions(in, out, 3).stride(stride).padding(1).bias(false)));
    bn1 = register_module("bn1", tnn::BatchNorm2d(out));
    conv2 = register_module("conv2", tnn::Conv2d(tnn::Conv2dOptions(out, out, 3).padding(1).bias(false)));
    bn2 = register_module("bn2", tnn::BatchNorm2d(out));
    if (stride != 1 || in != out) {
        downsample = register_module(
            "downsample", tnn::Sequential(tnn::Conv2d(tnn::Conv2dOptions(in, out, 1).stride(stride).bias(false)),
                                          tnn::BatchNorm2d(out)));
    }
}

torch::Tensor BasicBlockImpl::forward(const torch::Tensor& x) {
    auto y = torch::relu(bn1(conv1(x)));
    y = bn2(conv2(y));
    auto identity = downsample ? downsample->forward(x) : x;
    return torch::relu(y + identity);
}

namespace {

tnn::Sequential make_stage(std::int64_t in, std::int64_t out, int blocks, std::int64_t stride) {
    tnn::Sequential stage;
    stage->push_back(BasicBlock(in, out, stride));
    for (int i = 1; i < blocks; ++i) stage->push_back(BasicBlock(out, out, 1));
    return stage;
}

}  // namespace

ResNetEncoderImpl::ResNetEncoderImpl(const ResNetEncoderOptions& options) {
    std::array<int, 4> blocks{};
    switch (options.depth) {
        case 18: blocks = {2, 2, 2, 2}; break;
        case 34: blocks = {3, 4, 6, 3}; break;
        default: throw DomainError("unsupported residual encoder depth " + std::to_string(options.depth));
    }
    const std::array<std::int64_t, 4> base = {64, 128, 256, 512};
    for (std::size_t i = 0; i < 4; ++i) stage_channels[i] = scaled_channels(base[i], options.width);
    const auto c0 = stage_channels[0];

    stem = register_module(
        "stem", tnn::Conv2d(tnn::Conv2dOptions(options.in_channels, c0, 7).stride(2).padding(3).bias(false)));
    stem_bn = register_module("stem_bn", tnn::BatchNorm2d(c0));
    pool = register_module("pool", tnn::MaxPool2d(tnn::MaxPool2dOptions(3).stride(2).padding(1)));
    layer1 = register_module("layer1", make_stage(c0, stage_channels[0], blocks[0], 1));
    layer2 = register_module("layer2", make_stage(stage_channels[0], stage_channels[1], blocks[1], 2));
    layer3 = register_module("layer3", make_stage(stage_channels[1], stage_channels[2], blocks[2], 2));
    layer4 = register_module("layer4", make_stage(stage_channels[2], stage_channels[3], blocks[3], 2));
}

torch::Tensor ResNetEncoderImpl::forward(const torch::Tensor& x) {
    auto y = pool(torch::relu(stem_bn(stem(x))));
    y = layer1->forward(y);
    y = layer2->forward(y);
    y = layer3->forward(y);
    return layer4->forward(y);
}

}  // namespace echoguide::nn
