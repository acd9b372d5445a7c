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

#include "echoguide/augment.hpp"
#include "echoguide/landmark_ops.hpp"
#include "echoguide/nn/language_backbone.hpp"
#include "echoguide/nn/resnet.hpp"
#include "echoguide/pose_metrics.hpp"

namespace echoguide::pose {

inline constexpr int kPoseSchemaVersion = 1;
inline constexpr std::int64_t kLandmarkChannels = 6;  // one per key landmark

/// One unit-height Gaussian blob channel per key landmark (schema key order)
/// at the predicted location, rescaled from `source` to `target` pixel
/// space. Hidden landmarks give an all-zero channel. Returns (6, H, W).
torch::Tensor render_landmark_channels(std::span<const landmarks::LandmarkPrediction> predictions, cv::Size source,
                                       cv::Size target, double sigma = 2.0);

struct AdapterOptions {
    nn::BackboneConfig backbone;
    /// Directory with backbone.json + weights.pt; a seeded tiny backbone
    /// is generated when absent.
    std::optional<std::filesystem::path> backbone_dir;
    std::uint64_t backbone_seed = 0;
    std::int64_t prompt_length = 10;
    std::string instruction = "Rate the transducer pose of this apical four-chamber frame: green, yellow or red.";
};

struct PoseModelConfig {
    Architecture architecture = Architecture::regression;
    InputMode mode = InputMode::images_and_landmarks;
    int encoder_depth = 18;
    double width_multiplier = 1.0;
    int input_height = 112;
    int input_width = 112;
    double blob_sigma = 2.0;
    AdapterOptions adapter;

    /// Image channel (blank in landmarks_only) plus landmark channels when used.
    std::int64_t input_channels() const { return 1 + (uses_landmarks(mode) ? kLandmarkChannels : 0); }
    cv::Size input_size() const { return {input_width, input_height}; }

    nlohmann::json to_json() const;
    static PoseModelConfig from_json(const nlohmann::json& j);
};

/// Residual encoder, global average pool and a scalar head.
struct PoseRegressorImpl : torch::nn::Module {
    explicit PoseRegressorImpl(const PoseModelConfig& config);
    /// (B, C, H, W) -> (B,) raw scores.
    torch::Tensor forward(const torch::Tensor& x);

    nn::ResNetEncoder encoder{nullptr};
    torch::nn::Linear fc{nullptr};
};
TORCH_MODULE(PoseRegressor);

/// Image encoder whose pooled features are projected into per-layer adaption
/// prompts of a frozen language backbone reading a fixed instruction; the
/// final hidden state of the last token is classified into 3 categories.
struct PoseAdapterImpl : torch::nn::Module {
    PoseAdapterImpl(const PoseModelConfig& config, nn::LanguageBackbone backbone);
    /// (B, C, H, W) -> (B, 3) logits ordered red, yellow, green.
    torch::Tensor forward(const torch::Tensor& x);

    /// Parameters that training may update (everything but the backbone).
    std::vector<torch::Tensor> trainable_parameters();

    nn::ResNetEncoder encoder{nullptr};
    torch::nn::Linear visual_proj{nullptr};
    torch::Tensor prompts;  // (layers, P, dim)
    torch::Tensor gates;    // (layers, heads), zero-initialized
    torch::nn::Linear head{nullptr};
    nn::LanguageBackbone backbone{nullptr};
    torch::Tensor instruction;  // (1, T) token ids
};
TORCH_MODULE(PoseAdapter);

struct PoseOutput {
    PoseScore score;
    PoseCategory category = PoseCategory::green;
    /// Class probabilities (red, yellow, green) from the adapter.
    std::optional<std::array<double, 3>> probabilities;
};

class PoseScorer {
public:
    explicit PoseScorer(PoseModelConfig config);

    static PoseScorer load(const std::filesystem::path& dir);
    void save(const std::filesystem::path& dir, const std::optional<nlohmann::json>& training = {});

    /// (C, H, W) model input. `landmarks` are in the frame's pixel space and
    /// ignored when the mode does not use them.
    torch::Tensor make_input(const cv::Mat& frame, std::span<const landmarks::LandmarkPrediction> landmarks) const;

    /// Raw network output: (B,) scores or (B, 3) logits.
    torch::Tensor forward(const torch::Tensor& inputs);

    /// Inference on stacked inputs. Regression scores are clamped to
    /// [-2, 1]; adapter scores are the midpoint of the argmax category.
    std::vector<PoseOutput> score_batch(const torch::Tensor& inputs);
    PoseOutput score(const cv::Mat& frame, std::span<const landmarks::LandmarkPrediction> landmarks = {});

    const PoseModelConfig& config() const { return config_; }
    torch::nn::Module& module();
    PoseRegressor& regressor() { return regressor_; }
    PoseAdapter& adapter() { return adapter_; }

    /// SHA-256 of the frozen backbone (adapter only).
    std::string backbone_digest();

private:
    PoseModelConfig config_;
    PoseRegressor regressor_{nullptr};
    PoseAdapter adapter_{nullptr};
};

struct PoseSample {
    cv::Mat frame;
    std::vector<landmarks::LandmarkPrediction> landmarks;  // frame pixel space
    PoseCategory category = PoseCategory::green;
    double score = 0.5;
};

struct PoseTrainConfig {
    int epochs = 100;
    int batch_size = 32;
    double learning_rate = 1e-3;  // regression (Adam)
    double lr_min = 1e-5;         // adapter triangular cycle
    double lr_max = 1e-3;
    int half_cycle_steps = 0;     // 0: one epoch
    double weight_decay = 0.01;   // adapter (AdamW)
    std::uint64_t seed = 0;
    bool augment = true;
    ingest::AugmentationRanges ranges;
    std::size_t selection_window = 5;
};

struct PoseEpochLog {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    bool selected = false;
};

struct PoseTrainResult {
    std::vector<PoseEpochLog> epochs;
    CheckpointSelection selection;
    ClassWeights weights;
    std::optional<std::string> backbone_digest_before;
    std::optional<std::string> backbone_digest_after;

    nlohmann::json to_json() const;
};

/// Triangular cyclical learning rate: rises from lo to hi over `half_cycle`
/// steps, falls back over the next `half_cycle`, and repeats.
double triangular_lr(std::size_t step, std::size_t half_cycle, double lo, double hi);

/// Class-weighted MSE with Adam; restores the weights of the epoch chosen by
/// the trailing-mean validation rule. Without a validation set the training
/// loss stands in.
PoseTrainResult train_pose_regressor(PoseScorer& scorer, std::span<const PoseSample> train,
                                     std::span<const PoseSample> val, const PoseTrainConfig& config,
                                     const std::function<void(const PoseEpochLog&)>& on_epoch = {});

/// Class-weighted cross-entropy with AdamW and a triangular learning-rate
/// cycle, updating only non-backbone parameters. Throws InvariantViolation
/// when the backbone digest changes.
PoseTrainResult train_adapter_scorer(PoseScorer& scorer, std::span<const PoseSample> train,
                                     std::span<const PoseSample> val, const PoseTrainConfig& config,
                                     const std::function<void(const PoseEpochLog&)>& on_epoch = {});

PoseTrainResult train_pose_scorer(PoseScorer& scorer, std::span<const PoseSample> train,
                                  std::span<const PoseSample> val, const PoseTrainConfig& config,
                                  const std::function<void(const PoseEpochLog&)>& on_epoch = {});

/// Accuracy and confusion on labelled frames. Throws PreconditionError when
/// `test` is empty.
FoldResult evaluate_pose_fold(PoseScorer& scorer, std::span<const PoseSample> test, int fold_index = 0);

}  // namespace echoguide::pose
