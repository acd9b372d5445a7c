// Copyright (C) 2026 The EchoGuide Authors
// SPDX-License-Identifier: Apache-2.0

#include "echoguide/nn/lvef_estimator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "echoguide/error.hpp"
#include "echoguide/nn/resnet.hpp"
#include "echoguide/nn/tensor_util.hpp"
#include "echoguide/video_io.hpp"

namespace echoguide::lvef {

namespace tnn = torch::nn;
using nlohmann::json;

json LvefModelConfig::to_json() const {
    return {{"schema_version", kLvefSchemaVersion},
            {"blocks", blocks},
            {"width_multiplier", width_multiplier},
            {"clip_length", clip_length},
            {"stride", stride},
            {"input_hw", {input_height, input_width}},
            {"ef_scale", ef_scale},
            {"ef_offset", ef_offset},
            {"model_version", model_version}};
}

LvefModelConfig LvefModelConfig::from_json(const json& j) {
    LvefModelConfig c;
    try {
        if (j.at("schema_version").get<int>() != kLvefSchemaVersion) throw ParseError("unsupported LVEF schema_version");
        c.blocks = j.at("blocks").get<std::array<int, 4>>();
        c.width_multiplier = j.at("width_multiplier").get<double>();
        c.clip_length = j.at("clip_length").get<int>();
        c.stride = j.at("stride").get<int>();
        c.input_height = j.at("input_hw").at(0).get<int>();
        c.input_width = j.at("input_hw").at(1).get<int>();
        c.ef_scale = j.at("ef_scale").get<double>();
        c.ef_offset = j.at("ef_offset").get<double>();
        c.model_version = j.at("model_version").get<std::string>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("LVEF config: ") + e.what());
    }
    return c;
}

std::int64_t factorized_mid_channels(std::int64_t in, std::int64_t out, std::int64_t k, std::int64_t t) {
    return (t * k * k * in * out) / (k * k * in + t * out);
}

SpatioTemporalConvImpl::SpatioTemporalConvImpl(std::int64_t in, std::int64_t out, std::int64_t k, std::int64_t t,
                                               std::int64_t spatial_stride, std::int64_t temporal_stride,
                                               std::int64_t mid) {
    if (mid <= 0) mid = factorized_mid_channels(in, out, k, t);
    spatial = register_module(
        "spatial", tnn::Conv3d(tnn::Conv3dOptions(in, mid, {1, k, k})
                                   .stride({1, spatial_stride, spatial_stride})
                                   .padding({0, k / 2, k / 2})
                                   .bias(false)));
    bn = register_module("bn", tnn::BatchNorm3d(mid));
    temporal = register_module(
        "temporal",
        tnn::Conv3d(tnn::Conv3dOptions(mid, out, {t, 1, 1}).stride({temporal_stride, 1, 1}).padding({t / 2, 0, 0}).bias(false)));
}

torch::Tensor SpatioTemporalConvImpl::forward(const torch::Tensor& x) {
    return temporal(torch::relu(bn(spatial(x))));
}

VideoBlockImpl::VideoBlockImpl(std::int64_t in, std::int64_t out, std::int64_t stride) {
    conv1 = register_module("conv1", SpatioTemporalConv(in, out, 3, 3, stride, stride));
    bn1 = register_module("bn1", tnn::BatchNorm3d(out));
    conv2 = register_module("conv2", SpatioTemporalConv(out, out, 3, 3, 1, 1));
    bn2 = register_module("bn2", tnn::BatchNorm3d(out));
    if (stride != 1 || in != out) {
        downsample = register_module(
            "downsample", tnn::Sequential(tnn::Conv3d(tnn::Conv3dOptions(in, out, 1).stride(stride).bias(false)),
                                          tnn::BatchNorm3d(out)));
    }
}

torch::Tensor VideoBlockImpl::forward(const torch::Tensor& x) {
    auto y = torch::relu(bn1(conv1(x)));
    y = bn2(conv2(y));
    return torch::relu(y + (downsample ? downsample->forward(x) : x));
}

VideoRegressorImpl::VideoRegressorImpl(const LvefModelConfig& config) {
    const double w = config.width_multiplier;
    const auto c0 = nn::scaled_channels(64, w);
    stem = register_module("stem", SpatioTemporalConv(3, c0, 7, 3, 2, 1, nn::scaled_channels(45, w)));
    stem_bn = register_module("stem_bn", tnn::BatchNorm3d(c0));
    stages = tnn::Sequential();
    std::int64_t in = c0;
    const std::array<std::int64_t, 4> base = {64, 128, 256, 512};
    for (std::size_t s = 0; s < 4; ++s) {
        const auto out = nn::scaled_channels(base[s], w);
        for (int b = 0; b < config.blocks[s]; ++b) {
            const std::int64_t stride = (s > 0 && b == 0) ? 2 : 1;
            stages->push_back(VideoBlock(in, out, stride));
            in = out;
        }
    }
    register_module("stages", stages);
    fc = register_module("fc", tnn::Linear(in, 1));
}

torch::Tensor VideoRegressorImpl::forward(torch::Tensor x) {
    if (x.dim() != 5) throw ShapeError("video model expects (B, C, T, H, W)");
    if (x.size(1) == 1) x = x.expand({-1, 3, -1, -1, -1});
    auto y = torch::relu(stem_bn(stem(x)));
    y = stages->forward(y);
    return fc(torch::adaptive_avg_pool3d(y, {1, 1, 1}).flatten(1));
}

json lvef_report_json(const LvefEstimate& e) {
    return {{"clip_id", e.clip_id},
            {"frame_range", {e.frame_range[0], e.frame_range[1]}},
            {"lvef", e.value},
            {"model_version", e.model_version}};
}

std::vector<std::size_t> sample_clip_indices(std::size_t frame_count, int length, int stride) {
    if (frame_count == 0) throw PreconditionError("empty clip");
    if (length < 1 || stride < 1) throw DomainError("clip length and stride must be positive");
    std::vector<std::size_t> idx;
    for (int i = 0; i < length; ++i) {
        idx.push_back(std::min(frame_count - 1, static_cast<std::size_t>(i) * static_cast<std::size_t>(stride)));
    }
    return idx;
}

double clamp_lvef(double raw) {
    if (!std::isfinite(raw)) throw NumericError("non-finite LVEF output");
    return std::clamp(raw, 0.0, 100.0);
}

LvefEstimator::LvefEstimator(LvefModelConfig config) : config_(std::move(config)) {
    net_ = VideoRegressor(config_);
    net_->eval();
}

LvefEstimator LvefEstimator::load(const std::filesystem::path& dir) {
    LvefEstimator est(LvefModelConfig::from_json(nn::read_json(dir / "config.json")));
    const auto weights = dir / "weights.pt";
    if (!std::filesystem::exists(weights)) throw ParseError("missing " + weights.string());
    torch::load(est.net_, weights.string());
    est.net_->eval();
    return est;
}

void LvefEstimator::save(const std::filesystem::path& dir, const std::optional<json>& training) {
    std::filesystem::create_directories(dir);
    nn::write_json(dir / "config.json", config_.to_json());
    torch::save(net_, (dir / "weights.pt").string());
    if (training) nn::write_json(dir / "training.json", *training);
}

torch::Tensor LvefEstimator::make_input(std::span<const cv::Mat> frames) const {
    const auto idx = sample_clip_indices(frames.size(), config_.clip_length, config_.stride);
    std::vector<torch::Tensor> planes;
    planes.reserve(idx.size());
    for (auto i : idx) planes.push_back(nn::frame_to_tensor(frames[i], config_.input_size()));
    return torch::stack(planes, 1);  // (1, T, H, W)
}

torch::Tensor LvefEstimator::predict_percent(const torch::Tensor& inputs) {
    torch::NoGradGuard no_grad;
    net_->eval();
    return net_->forward(inputs).squeeze(1) * config_.ef_scale + config_.ef_offset;
}

LvefEstimate LvefEstimator::estimate(std::span<const cv::Mat> frames, double fps, const std::string& clip_id,
                                     std::optional<std::array<std::size_t, 2>> frame_range) {
    if (!gate_clip(frames.size(), fps)) {
        throw PreconditionError("clip of " + std::to_string(frames.size()) + " frames at " + std::to_string(fps) +
                                " fps does not qualify for LVEF estimation");
    }
    LvefEstimate e;
    e.value = clamp_lvef(predict_percent(make_input(frames).unsqueeze(0))[0].item<double>());
    e.clip_id = clip_id;
    e.frame_range = frame_range.value_or(std::array<std::size_t, 2>{0, frames.size() - 1});
    e.model_version = config_.model_version;
    return e;
}

json LvefTrainResult::to_json() const {
    json e = json::array();
    for (const auto& log : epochs) {
        json row = {{"epoch", log.epoch}, {"train_loss", log.train_loss}};
        row["val_mae"] = log.val_mae ? json(*log.val_mae) : json(nullptr);
        e.push_back(row);
    }
    return {{"epochs", e}, {"step_losses", step_losses}};
}

double lvef_mae(LvefEstimator& estimator, std::span<const LvefSample> samples) {
    if (samples.empty()) throw PreconditionError("no clips to evaluate");
    double total = 0.0;
    for (const auto& s : samples) {
        const double p = clamp_lvef(estimator.predict_percent(estimator.make_input(s.frames).unsqueeze(0))[0].item<double>());
        total += std::abs(p - s.ef);
    }
    return total / static_cast<double>(samples.size());
}

LvefTrainResult train_lvef_estimator(LvefEstimator& estimator, std::span<const LvefSample> train,
                                     std::span<const LvefSample> val, const LvefTrainConfig& config,
                                     const std::function<void(const LvefEpochLog&)>& on_epoch) {
    if (train.empty()) throw PreconditionError("empty LVEF training set");
    nn::set_deterministic(config.seed);
    std::mt19937_64 rng(config.seed);
    const auto& cfg = estimator.config();
    std::vector<torch::Tensor> inputs;
    inputs.reserve(train.size());
    for (const auto& s : train) inputs.push_back(estimator.make_input(s.frames));

    auto net = estimator.net();
    torch::optim::Adam optimizer(net->parameters(), torch::optim::AdamOptions(config.learning_rate));
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    const auto batch_size = static_cast<std::size_t>(std::max(1, config.batch_size));

    LvefTrainResult result;
    int steps = 0;
    bool capped = false;
    for (int epoch = 1; epoch <= config.epochs && !capped; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        net->train();
        double sum = 0.0;
        int batches = 0;
        for (std::size_t start = 0; start < order.size(); start += batch_size) {
            const auto end = std::min(order.size(), start + batch_size);
            std::vector<torch::Tensor> xs;
            std::vector<float> ys;
            for (std::size_t k = start; k < end; ++k) {
                xs.push_back(inputs[order[k]]);
                ys.push_back(static_cast<float>((train[order[k]].ef - cfg.ef_offset) / cfg.ef_scale));
            }
            optimizer.zero_grad();
            auto pred = net->forward(torch::stack(xs)).squeeze(1);
            auto loss = (pred - torch::tensor(ys)).pow(2).mean();
            const double value = loss.item<double>();
            if (!std::isfinite(value)) throw NumericError("LVEF loss diverged at epoch " + std::to_string(epoch));
            loss.backward();
            optimizer.step();
            result.step_losses.push_back(value);
            sum += value;
            ++batches;
            if (config.max_steps > 0 && ++steps >= config.max_steps) {
                capped = true;
                break;
            }
        }
        LvefEpochLog log;
        log.epoch = epoch;
        log.train_loss = sum / std::max(1, batches);
        if (!val.empty()) log.val_mae = lvef_mae(estimator, val);
        result.epochs.push_back(log);
        if (on_epoch) on_epoch(log);
    }
    net->eval();
    return result;
}

std::vector<LvefSample> collect_lvef_samples(const ingest::EchoNetDataset& dataset, std::optional<ingest::Split> split) {
    std::vector<LvefSample> out;
    for (const auto& clip : dataset.clips) {
        if (split && clip.split != *split) continue;
        LvefSample s{clip.clip_id, clip.frames, clip.ef_label};
        if (s.frames.empty()) s.frames = video::read_frames(clip.video_path);
        if (s.frames.empty()) continue;
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace echoguide::lvef
