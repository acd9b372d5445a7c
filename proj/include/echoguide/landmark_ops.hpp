// Copyright (C) 2026 The EchoGuide Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "echoguide/ingest.hpp"
#include "echoguide/landmark_schema.hpp"

// Tensor-free heatmap helpers shared by training, inference and evaluation.
namespace echoguide::landmarks {

struct PixelCoord {
    int x = 0;
    int y = 0;
    friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
};

/// Row-major flat index of the rounded, clamped coordinate.
std::int64_t encode_target_index(double x, double y, int width, int height);

inline PixelCoord decode_index(std::int64_t index, int width) {
    return {static_cast<int>(index % width), static_cast<int>(index / width)};
}

/// Index of the largest value; ties resolve to the lowest index.
std::size_t argmax_index(std::span<const float> values);

enum class UncertaintyMode {
    /// Equivalent-circle radius of the pixels strictly above tau.
    above_threshold,
    /// Equivalent-circle radius of the smallest pixel set holding top_p mass.
    top_p_mass,
};

struct UncertaintyConfig {
    UncertaintyMode mode = UncertaintyMode::above_threshold;
    double tau = 0.0;    // <= 0 selects 1 / (H * W)
    double top_p = 0.9;  // used by top_p_mass
};

/// Equivalent-circle uncertainty radius (pixels) of one normalized map.
/// An empty region yields the maximal radius sqrt(H * W / pi).
double uncertainty_radius(std::span<const float> probs, int height, int width,
                          const UncertaintyConfig& config = {});

inline double max_uncertainty_radius(int height, int width) {
    return std::sqrt(static_cast<double>(height) * width / 3.14159265358979323846);
}

struct VisibilityGate {
    double r_vis = 12.0;       // radius ceiling in pixels
    double p_vis = 0.0;        // peak floor; <= 0 selects 5 / (H * W)

    /// Defaults scaled to a frame of the given size (12 px at 112 rows).
    static VisibilityGate for_frame(int height, int width);
};

struct LandmarkPrediction {
    LandmarkId id = 0;
    double x = 0.0;
    double y = 0.0;
    double peak = 0.0;
    double radius = 0.0;
    bool visible = false;
};

/// visible iff radius <= r_vis and peak >= p_vis.
bool landmark_visibility_gate(const LandmarkPrediction& prediction, const VisibilityGate& gate);

/// Decodes one probability map: argmax location, peak probability,
/// uncertainty radius and visibility.
LandmarkPrediction decode_channel(LandmarkId id, std::span<const float> probs, int height, int width,
                                  const UncertaintyConfig& uncertainty, const VisibilityGate& gate);

/// Per-visibility-level sample weights, reduced by mean over annotated points.
struct VisibilityWeightMap {
    std::array<double, 3> weights = {1.0, 0.5, 0.25};  // visibility 1, 2, 3

    double weight(int visibility) const { return weights.at(static_cast<std::size_t>(visibility - 1)); }
    /// Mean weight over scoreable landmarks; 1 when none are annotated.
    double sample_weight(const ingest::LandmarkAnnotation& annotation) const;
};

struct ErrorStats {
    double mean = 0.0;
    double stddev = 0.0;
    std::size_t count = 0;
};

struct LandmarkErrorReport {
    /// Distances pooled over frames for each landmark.
    std::map<LandmarkId, ErrorStats> per_landmark;
    /// Mean +- std over frames of each frame's mean distance.
    ErrorStats overall;
    /// Same aggregation restricted to the key landmarks.
    ErrorStats key_subset;
};

/// Euclidean distance between predictions and scoreable annotations.
/// `predictions[i]` pairs with `annotations[i]`. Throws PreconditionError
/// when nothing overlaps.
LandmarkErrorReport evaluate_landmark_error(std::span<const std::vector<LandmarkPrediction>> predictions,
                                            std::span<const ingest::LandmarkAnnotation> annotations);

}  // namespace echoguide::landmarks
