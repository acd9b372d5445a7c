// Copyright (C) 2026 The EchoGuide Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "echoguide/rubric.hpp"

namespace echoguide::pose {

inline constexpr double kScoreMin = -2.0;
inline constexpr double kScoreMax = 1.0;

/// Continuous pose score, clamped to [-2, 1] on construction.
class PoseScore {
public:
    PoseScore() = default;
    explicit PoseScore(double v);

    double value() const { return value_; }

private:
    double value_ = kScoreMax;
};

/// green iff s >= 0, yellow iff -1 <= s < 0, red iff s < -1.
constexpr PoseCategory score_to_category(double s) {
    if (s >= 0.0) return PoseCategory::green;
    if (s >= -1.0) return PoseCategory::yellow;
    return PoseCategory::red;
}

inline PoseCategory score_to_category(PoseScore s) { return score_to_category(s.value()); }

/// Midpoint of a category's score range (green 0.5, yellow -0.5, red -1.5).
constexpr double category_midpoint(PoseCategory c) {
    return static_cast<double>(static_cast<int>(c)) - 1.5;
}

enum class InputMode { images_only, landmarks_only, images_and_landmarks };
enum class Architecture { regression, adapter };

std::string_view to_string(InputMode m);
std::string_view to_string(Architecture a);
std::optional<InputMode> parse_mode(std::string_view token);
std::optional<Architecture> parse_architecture(std::string_view token);

constexpr bool uses_landmarks(InputMode m) { return m != InputMode::images_only; }

struct ClassWeights {
    double green = 1.0;
    double yellow = 1.0;
    double red = 1.0;

    double operator[](PoseCategory c) const {
        switch (c) {
            case PoseCategory::green: return green;
            case PoseCategory::yellow: return yellow;
            case PoseCategory::red: return red;
        }
        return 1.0;
    }
};

struct CategoryCounts {
    std::uint64_t green = 0;
    std::uint64_t yellow = 0;
    std::uint64_t red = 0;
};

/// Inverse-frequency weights w_c = N / (3 N_c). Throws DomainError on a zero count.
ClassWeights compute_class_weights(const CategoryCounts& counts);

/// mean_i w_{cat(i)} (pred_i - target_i)^2. Throws ShapeError on length mismatch.
double weighted_mse(std::span<const double> pred, std::span<const double> target,
                    std::span<const PoseCategory> categories, const ClassWeights& weights);

/// 3x3 counts indexed [truth][prediction] by index_of(PoseCategory).
using Confusion = std::array<std::array<std::uint64_t, 3>, 3>;

struct FoldResult {
    int fold_index = 0;
    double accuracy = 0.0;
    Confusion confusion{};

    std::uint64_t total() const;
};

/// Accuracy and confusion of predicted vs. true categories. Throws
/// PreconditionError on an empty test set.
FoldResult evaluate_categories(int fold_index, std::span<const PoseCategory> truth,
                               std::span<const PoseCategory> predicted);

/// Epoch whose trailing `window`-epoch mean validation loss is lowest (ties
/// keep the earliest). With fewer than `window` epochs this degrades to the
/// best single epoch and sets `degraded`.
struct CheckpointSelection {
    std::size_t epoch = 0;
    double trailing_mean = 0.0;
    bool degraded = false;
};
CheckpointSelection select_checkpoint_epoch(std::span<const double> val_losses, std::size_t window = 5);

/// Online form of select_checkpoint_epoch used during training.
class TrailingMeanSelector {
public:
    explicit TrailingMeanSelector(std::size_t window = 5) : window_(window) {}

    /// Records one epoch; returns true when this epoch becomes the selection.
    bool observe(double val_loss);
    /// Call after the last epoch. If fewer than `window` epochs were seen the
    /// selection falls back to the best single epoch.
    CheckpointSelection result() const;
    bool degraded() const { return losses_.size() < window_; }

private:
    std::size_t window_;
    std::vector<double> losses_;
    std::optional<CheckpointSelection> best_;
    std::optional<CheckpointSelection> best_single_;
};

/// {fold_index, mode, architecture, accuracy, confusion}
nlohmann::json fold_report_json(const FoldResult& result, InputMode mode, Architecture arch);

/// Grid of fold accuracies (modes x architectures, 5 folds + mean), built
/// from fold reports.
nlohmann::json aggregate_report_json(std::span<const nlohmann::json> fold_reports);

}  // namespace echoguide::pose
