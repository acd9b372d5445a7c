// Copyright (C) 2026 The EchoGuide Authors
// SPDX-License-Identifier: Apache-2.0

#include "echoguide/pose_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "echoguide/error.hpp"

namespace echoguide::pose {

PoseScore::PoseScore(double v) {
    if (!std::isfinite(v)) throw NumericError("pose score must be finite");
    value_ = std::clamp(v, kScoreMin, kScoreMax);
}

std::string_view to_string(InputMode m) {
    switch (m) {
        case InputMode::images_only: return "images_only";
        case InputMode::landmarks_only: return "landmarks_only";
        case InputMode::images_and_landmarks: return "images_and_landmarks";
    }
    return "unknown";
}

std::string_view to_string(Architecture a) {
    switch (a) {
        case Architecture::regression: return "regression";
        case Architecture::adapter: return "adapter";
    }
    return "unknown";
}

std::optional<InputMode> parse_mode(std::string_view token) {
    for (auto m : {InputMode::images_only, InputMode::landmarks_only, InputMode::images_and_landmarks}) {
        if (to_string(m) == token) return m;
    }
    return std::nullopt;
}

std::optional<Architecture> parse_architecture(std::string_view token) {
    for (auto a : {Architecture::regression, Architecture::adapter}) {
        if (to_string(a) == token) return a;
    }
    return std::nullopt;
}

ClassWeights compute_class_weights(const CategoryCounts& counts) {
    if (counts.green == 0 || counts.yellow == 0 || counts.red == 0) {
        throw DomainError("class weights need at least one frame of every category");
    }
    const double total = static_cast<double>(counts.green + counts.yellow + counts.red);
    return {total / (3.0 * static_cast<double>(counts.green)),
            total / (3.0 * static_cast<double>(counts.yellow)),
            total / (3.0 * static_cast<double>(counts.red))};
}

double weighted_mse(std::span<const double> pred, std::span<const double> target,
                    std::span<const PoseCategory> categories, const ClassWeights& weights) {
    if (pred.size() != target.size() || pred.size() != categories.size()) {
        throw ShapeError("weighted_mse: prediction, target and category lengths differ");
    }
    if (pred.empty()) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        sum += weights[categories[i]] * d * d;
    }
    return sum / static_cast<double>(pred.size());
}

std::uint64_t FoldResult::total() const {
    std::uint64_t n = 0;
    for (const auto& row : confusion) {
        for (auto v : row) n += v;
    }
    return n;
}

FoldResult evaluate_categories(int fold_index, std::span<const PoseCategory> truth,
                               std::span<const PoseCategory> predicted) {
    if (truth.size() != predicted.size()) throw ShapeError("truth and prediction lengths differ");
    if (truth.empty()) throw PreconditionError("empty test set");
    FoldResult r;
    r.fold_index = fold_index;
    std::uint64_t correct = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        ++r.confusion[index_of(truth[i])][index_of(predicted[i])];
        if (truth[i] == predicted[i]) ++correct;
    }
    r.accuracy = static_cast<double>(correct) / static_cast<double>(truth.size());
    return r;
}

CheckpointSelection select_checkpoint_epoch(std::span<const double> val_losses, std::size_t window) {
    TrailingMeanSelector selector(window);
    for (double v : val_losses) selector.observe(v);
    return selector.result();
}

bool TrailingMeanSelector::observe(double val_loss) {
    losses_.push_back(val_loss);
    const std::size_t epoch = losses_.size() - 1;
    if (!best_single_ || val_loss < best_single_->trailing_mean) {
        best_single_ = CheckpointSelection{epoch, val_loss, true};
    }
    if (losses_.size() < window_) {
        // Until a full window exists the single-epoch fallback is the candidate.
        return best_single_->epoch == epoch;
    }
    double sum = 0.0;
    for (std::size_t i = losses_.size() - window_; i < losses_.size(); ++i) sum += losses_[i];
    const double mean = sum / static_cast<double>(window_);
    if (!best_ || mean < best_->trailing_mean) {
        best_ = CheckpointSelection{epoch, mean, false};
        return true;
    }
    return false;
}

CheckpointSelection TrailingMeanSelector::result() const {
    if (losses_.empty()) throw PreconditionError("no validation losses recorded");
    if (best_) return *best_;
    return *best_single_;
}

nlohmann::json fold_report_json(const FoldResult& result, InputMode mode, Architecture arch) {
    nlohmann::json confusion = nlohmann::json::array();
    // Rows and columns ordered green, yellow, red.
    for (auto truth : kAllCategories) {
        nlohmann::json row = nlohmann::json::array();
        for (auto pred : kAllCategories) row.push_back(result.confusion[index_of(truth)][index_of(pred)]);
        confusion.push_back(std::move(row));
    }
    return {{"fold_index", result.fold_index},
            {"mode", std::string(to_string(mode))},
            {"architecture", std::string(to_string(arch))},
            {"accuracy", result.accuracy},
            {"confusion", std::move(confusion)}};
}

nlohmann::json aggregate_report_json(std::span<const nlohmann::json> fold_reports) {
    std::map<std::string, std::map<std::string, std::vector<std::pair<int, double>>>> cells;
    for (const auto& r : fold_reports) {
        cells[r.at("mode").get<std::string>()][r.at("architecture").get<std::string>()].emplace_back(
            r.at("fold_index").get<int>(), r.at("accuracy").get<double>());
    }
    nlohmann::json grid = nlohmann::json::object();
    for (auto& [mode, archs] : cells) {
        for (auto& [arch, folds] : archs) {
            std::sort(folds.begin(), folds.end());
            nlohmann::json accs = nlohmann::json::object();
            double sum = 0.0;
            for (const auto& [k, acc] : folds) {
                accs[std::to_string(k)] = acc;
                sum += acc;
            }
            grid[mode][arch] = {{"folds", std::move(accs)}, {"mean", sum / static_cast<double>(folds.size())}};
        }
    }
    return grid;
}

}  // namespace echoguide::pose
