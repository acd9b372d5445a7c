// Copyright (C) 2026 The EchoGuide Authors
// SPDX-License-Identifier: Apache-2.0

#include "echoguide/landmark_ops.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

#include "echoguide/error.hpp"

namespace echoguide::landmarks {

namespace {

constexpr double kPi = 3.14159265358979323846;

ErrorStats summarize(const std::vector<double>& values) {
    ErrorStats s;
    s.count = values.size();
    if (values.empty()) return s;
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return s;
}

}  // namespace

std::int64_t encode_target_index(double x, double y, int width, int height) {
    const auto xi = std::clamp<std::int64_t>(std::llround(x), 0, width - 1);
    const auto yi = std::clamp<std::int64_t>(std::llround(y), 0, height - 1);
    return yi * width + xi;
}

std::size_t argmax_index(std::span<const float> values) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) best = i;
    }
    return best;
}

double uncertainty_radius(std::span<const float> probs, int height, int width, const UncertaintyConfig& config) {
    const auto area = static_cast<double>(height) * width;
    std::size_t n = 0;
    if (config.mode == UncertaintyMode::above_threshold) {
        const double tau = config.tau > 0.0 ? config.tau : 1.0 / area;
        for (float p : probs) {
            if (static_cast<double>(p) > tau) ++n;
        }
    } else {
        std::vector<float> sorted(probs.begin(), probs.end());
        std::sort(sorted.begin(), sorted.end(), std::greater<>());
        double mass = 0.0;
        for (float p : sorted) {
            if (mass >= config.top_p) break;
            mass += p;
            ++n;
        }
    }
    if (n == 0) return std::sqrt(area / kPi);
    return std::sqrt(static_cast<double>(n) / kPi);
}

VisibilityGate VisibilityGate::for_frame(int height, int width) {
    VisibilityGate g;
    g.r_vis = 12.0 * static_cast<double>(height) / 112.0;
    g.p_vis = 5.0 / (static_cast<double>(height) * width);
    return g;
}

bool landmark_visibility_gate(const LandmarkPrediction& prediction, const VisibilityGate& gate) {
    return prediction.radius <= gate.r_vis && prediction.peak >= gate.p_vis;
}

LandmarkPrediction decode_channel(LandmarkId id, std::span<const float> probs, int height, int width,
                                  const UncertaintyConfig& uncertainty, const VisibilityGate& gate) {
    if (probs.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width)) {
        throw ShapeError("probability map size does not match H x W");
    }
    const auto idx = argmax_index(probs);
    const auto coord = decode_index(static_cast<std::int64_t>(idx), width);
    LandmarkPrediction p;
    p.id = id;
    p.x = coord.x;
    p.y = coord.y;
    p.peak = probs[idx];
    p.radius = uncertainty_radius(probs, height, width, uncertainty);
    VisibilityGate effective = gate;
    if (effective.p_vis <= 0.0) effective.p_vis = 5.0 / (static_cast<double>(height) * width);
    p.visible = landmark_visibility_gate(p, effective);
    return p;
}

double VisibilityWeightMap::sample_weight(const ingest::LandmarkAnnotation& annotation) const {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& [id, pt] : annotation.points) {
        if (!pt.in_bounds) continue;
        sum += weight(pt.visibility);
        ++n;
    }
    return n == 0 ? 1.0 : sum / static_cast<double>(n);
}

LandmarkErrorReport evaluate_landmark_error(std::span<const std::vector<LandmarkPrediction>> predictions,
                                            std::span<const ingest::LandmarkAnnotation> annotations) {
    if (predictions.size() != annotations.size()) {
        throw ShapeError("prediction and annotation counts differ");
    }
    std::map<LandmarkId, std::vector<double>> per_landmark;
    std::vector<double> frame_means;
    std::vector<double> key_frame_means;

    for (std::size_t f = 0; f < predictions.size(); ++f) {
        double sum = 0.0;
        double key_sum = 0.0;
        std::size_t n = 0;
        std::size_t key_n = 0;
        for (const auto& pred : predictions[f]) {
            if (!annotations[f].scoreable(pred.id)) continue;
            const auto& gt = annotations[f].points.at(pred.id);
            const double d = std::hypot(pred.x - gt.x, pred.y - gt.y);
            per_landmark[pred.id].push_back(d);
            sum += d;
            ++n;
            if (is_key_landmark(pred.id)) {
                key_sum += d;
                ++key_n;
            }
        }
        if (n > 0) frame_means.push_back(sum / static_cast<double>(n));
        if (key_n > 0) key_frame_means.push_back(key_sum / static_cast<double>(key_n));
    }
    if (frame_means.empty()) throw PreconditionError("no annotated landmarks overlap the predictions");

    LandmarkErrorReport report;
    for (const auto& [id, values] : per_landmark) report.per_landmark[id] = summarize(values);
    report.overall = summarize(frame_means);
    report.key_subset = summarize(key_frame_means);
    return report;
}

}  // namespace echoguide::landmarks
