// Copyright (C) 2026 The EchoGuide Authors
// SPDX-License-Identifier: Apache-2.0

#include "echoguide/augment.hpp"

#include <opencv2/imgproc.hpp>

namespace echoguide::ingest {

AugmentationParams draw_augmentation(const AugmentationRanges& ranges, cv::Size frame_size,
                                     std::mt19937_64& rng) {
    auto uniform = [&rng](double lo, double hi) {
        return lo == hi ? lo : std::uniform_real_distribution<double>(lo, hi)(rng);
    };
    AugmentationParams p;
    p.brightness = uniform(-ranges.brightness, ranges.brightness);
    p.contrast = uniform(ranges.contrast_min, ranges.contrast_max);
    p.scale = uniform(ranges.scale_min, ranges.scale_max);
    p.tx = uniform(-ranges.translate_fraction, ranges.translate_fraction) * frame_size.width;
    p.ty = uniform(-ranges.translate_fraction, ranges.translate_fraction) * frame_size.height;
    return p;
}

cv::Matx23d augmentation_matrix(const AugmentationParams& params, cv::Size frame_size) {
    const cv::Point2d pivot =
        params.pivot.value_or(cv::Point2d((frame_size.width - 1) / 2.0, (frame_size.height - 1) / 2.0));
    const double s = params.scale;
    return {s, 0.0, pivot.x * (1.0 - s) + params.tx,  //
            0.0, s, pivot.y * (1.0 - s) + params.ty};
}

AugmentedFrame apply_augmentation(const cv::Mat& frame, const std::optional<LandmarkAnnotation>& landmarks,
                                  const AugmentationParams& params) {
    AugmentedFrame out;
    out.landmarks = landmarks;
    if (params.is_identity()) {
        out.image = frame.clone();
        return out;
    }

    const auto m = augmentation_matrix(params, frame.size());
    cv::Mat warped;
    cv::warpAffine(frame, warped, cv::Mat(m), frame.size(), cv::INTER_LINEAR, cv::BORDER_CONSTANT,
                   cv::Scalar(0));
    warped.convertTo(out.image, frame.type(), params.contrast, params.brightness * 255.0);

    if (out.landmarks) {
        const double w = frame.cols;
        const double h = frame.rows;
        for (auto& [id, pt] : out.landmarks->points) {
            const double x = m(0, 0) * pt.x + m(0, 1) * pt.y + m(0, 2);
            const double y = m(1, 0) * pt.x + m(1, 1) * pt.y + m(1, 2);
            pt.x = x;
            pt.y = y;
            if (x < 0.0 || y < 0.0 || x > w - 1.0 || y > h - 1.0) pt.in_bounds = false;
        }
    }
    return out;
}

AugmentedFrame augment_frame(const cv::Mat& frame, const std::optional<LandmarkAnnotation>& landmarks,
                             const AugmentationRanges& ranges, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return apply_augmentation(frame, landmarks, draw_augmentation(ranges, frame.size(), rng));
}

}  // namespace echoguide::ingest
