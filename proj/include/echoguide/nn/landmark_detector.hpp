// Copyright (C) 2026 The EchoGuide Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>
#include <opencv2/core.hpp>
#include <torch/torch.h>

#include "echoguide/augment.hpp"
#include "echoguide/ingest.hpp"
#include "echoguide/landmark_ops.hpp"
#include "echoguide/nn/resnet.hpp"

namespace echoguide::landmarks {

inline constexpr int kCheckpointSchemaVersion = 1;

struct LandmarkModelConfig {
    int encoder_depth = 34;
    double width_multiplier = 1.0;
    int input_height = 112;
    int input_width = 112;
    VisibilityWeightMap vis_weight_map;
    double tau = 0.0;  // <= 0 selects 1 / (H * W)
    VisibilityGate gate;
    /// Optional encoder weights (torch archive of a ResNetEncoder with
    /// matching depth and width); not part of the checkpoint schema.
    std::optional<std::filesystem::path> pretrained_encoder;

    /// Schema-fixed checkpoint config; tau and the gate are stored resolved.
    nlohmann::json to_json() const;
    static LandmarkModelConfig from_json(const nlohmann::json& j);

    cv::Size input_size() const { return {input_width, input_height}; }
    double resolved_tau() const;
    VisibilityGate resolved_gate() const;
};

/// Residual encoder followed by five stride-2 transposed-conv blocks and a
/// 1x1 head producing one logit map per landmark at input resolution.
struct LandmarkNetImpl : torch::nn::Module {
    explicit LandmarkNetImpl(const LandmarkModelConfig& config);

    /// (B, 1 or 3, H, W) -> (B, 47, H, W). Sizes that are not multiples of 32
    /// are zero-padded internally.
    torch::Tensor forward(torch::Tensor x);

    nn::ResNetEncoder encoder{nullptr};
    torch::nn::Sequential decoder{nullptr};
    torch::nn::Conv2d head{nullptr};
};
TORCH_MODULE(LandmarkNet);

struct AnnotationBatch {
    torch::Tensor targets;  // (B, L) int64 flat pixel indices
    torch::Tensor mask;     // (B, L) bool
    torch::Tensor vis_w;    // (B,) float, > 0
};

/// Sum over landmarks of -log softmax(logits)[target] * mask * vis_w,
/// averaged over the batch.
torch::Tensor masked_weighted_nll(const torch::Tensor& logits, const AnnotationBatch& batch);

/// Closed-form gradient of masked_weighted_nll with respect to the logits:
/// (softmax - onehot(target)) * mask * vis_w / B.
torch::Tensor masked_weighted_nll_grad(const torch::Tensor& logits, const AnnotationBatch& batch);

/// Softmax over the H*W pixels of every (b, l) channel.
torch::Tensor spatial_softmax(const torch::Tensor& logits);

/// Decodes (L, H, W) probability maps.
std::vector<LandmarkPrediction> decode_landmarks(const torch::Tensor& probs, const UncertaintyConfig& uncertainty,
                                                 const VisibilityGate& gate);

struct LandmarkSample {
    cv::Mat frame;
    ingest::LandmarkAnnotation annotation;
};

/// Rescales annotation coordinates from `from` to `to` pixel space.
ingest::LandmarkAnnotation rescale_annotation(const ingest::LandmarkAnnotation& annotation, cv::Size from,
                                              cv::Size to);

/// Targets, mask and sample weights for annotations already in the model's
/// pixel space. Out-of-bounds points are left unmasked.
AnnotationBatch make_annotation_batch(std::span<const ingest::LandmarkAnnotation> annotations, int height,
                                      int width, const VisibilityWeightMap& weights);

class LandmarkDetector {
public:
    explicit LandmarkDetector(LandmarkModelConfig config);

    static LandmarkDetector load(const std::filesystem::path& dir);
    /// Writes config.json and weights.pt; `training` goes to training.json.
    void save(const std::filesystem::path& dir, const std::optional<nlohmann::json>& training = {});

    /// Frames must match the configured input size.
    std::vector<LandmarkPrediction> predict(const cv::Mat& frame);
    std::vector<std::vector<LandmarkPrediction>> predict_batch(std::span<const cv::Mat> frames);
    /// Resizes to the input size, predicts, and maps coordinates and radii
    /// back into the frame's own pixel space.
    std::vector<LandmarkPrediction> predict_rescaled(const cv::Mat& frame);

    const LandmarkModelConfig& config() const { return config_; }
    LandmarkNet& net() { return net_; }

    UncertaintyConfig uncertainty;

private:
    torch::Tensor prepare(std::span<const cv::Mat> frames) const;

    LandmarkModelConfig config_;
    LandmarkNet net_{nullptr};
};

struct LandmarkTrainConfig {
    int epochs = 20;
    int batch_size = 512;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
    int max_steps = 0;  // 0: no step cap
    bool augment = true;
    ingest::AugmentationRanges ranges;
    bool shuffle = true;
};

struct LandmarkEpochLog {
    int epoch = 0;
    int steps = 0;
    double train_loss = 0.0;
    std::optional<double> val_loss;
};

struct LandmarkTrainResult {
    std::vector<LandmarkEpochLog> epochs;
    std::vector<double> step_losses;

    nlohmann::json to_json() const;
};

/// Adam on masked_weighted_nll. Samples are resized to the model input.
/// Throws PreconditionError on an empty training set and NumericError when
/// the loss stops being finite.
LandmarkTrainResult train_landmark_detector(LandmarkDetector& detector, std::span<const LandmarkSample> train,
                                            std::span<const LandmarkSample> val, const LandmarkTrainConfig& config,
                                            const std::function<void(const LandmarkEpochLog&)>& on_epoch = {});

/// Mean validation loss in eval mode.
double landmark_loss(LandmarkDetector& detector, std::span<const LandmarkSample> samples, int batch_size = 64);

/// Predicts every sample and scores it against its (rescaled) annotation.
LandmarkErrorReport evaluate_detector(LandmarkDetector& detector, std::span<const LandmarkSample> samples);

/// Annotated frames from a parsed dataset, matched by clip and frame index.
std::vector<LandmarkSample> collect_samples(const ingest::EchoNetDataset& dataset,
                                            std::optional<ingest::Split> split = {});

}  // namespace echoguide::landmarks
