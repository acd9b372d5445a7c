// Copyright (C) 2026 The EchoGuide Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <random>

#include <opencv2/core.hpp>

#include "echoguide/ingest.hpp"

namespace echoguide::ingest {

/// Sampling ranges for training augmentation.
struct AugmentationRanges {
    double brightness = 0.20;         // offset, +- fraction of the 8-bit range
    double contrast_min = 0.8;        // multiplicative gain
    double contrast_max = 1.2;
    double scale_min = 0.9;           // uniform scale about the image centre
    double scale_max = 1.1;
    double translate_fraction = 0.10; // +- fraction of width / height
};

/// One concrete augmentation draw. Intensity: out = gain * in + offset * 255.
/// Geometry: p' = pivot + scale * (p - pivot) + (tx, ty).
struct AugmentationParams {
    double brightness = 0.0;
    double contrast = 1.0;
    double scale = 1.0;
    double tx = 0.0;
    double ty = 0.0;
    std::optional<cv::Point2d> pivot;  // defaults to the image centre

    bool is_identity() const {
        return brightness == 0.0 && contrast == 1.0 && scale == 1.0 && tx == 0.0 && ty == 0.0;
    }
};

AugmentationParams draw_augmentation(const AugmentationRanges& ranges, cv::Size frame_size,
                                     std::mt19937_64& rng);

/// 2x3 forward mapping from source to augmented pixel coordinates.
cv::Matx23d augmentation_matrix(const AugmentationParams& params, cv::Size frame_size);

struct AugmentedFrame {
    cv::Mat image;
    std::optional<LandmarkAnnotation> landmarks;
};

/// Applies `params` to the frame and the same affine map to the landmarks.
/// Points that leave the frame are flagged in_bounds = false.
AugmentedFrame apply_augmentation(const cv::Mat& frame, const std::optional<LandmarkAnnotation>& landmarks,
                                  const AugmentationParams& params);

/// Draws parameters from `ranges` with a generator seeded by `seed` and applies them.
AugmentedFrame augment_frame(const cv::Mat& frame, const std::optional<LandmarkAnnotation>& landmarks,
                             const AugmentationRanges& ranges, std::uint64_t seed);

}  // namespace echoguide::ingest
