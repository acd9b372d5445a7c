// Copyright (C) 2026 The EchoGuide Authors
// SPDX-License-Identifier: Apache-2.0

#include <random>

#include <opencv2/core.hpp>

#include "doctest.h"
#include "echoguide/augment.hpp"
#include "echoguide/landmark_ops.hpp"

using namespace echoguide;
using namespace echoguide::ingest;

namespace {

cv::Mat noise_frame(std::uint64_t seed, cv::Size size = {64, 48}) {
    cv::Mat m(size, CV_8UC1);
    cv::RNG rng(seed);
    rng.fill(m, cv::RNG::UNIFORM, 0, 256);
    return m;
}

bool identical(const cv::Mat& a, const cv::Mat& b) {
    return a.size() == b.size() && a.type() == b.type() && cv::countNonZero(a != b) == 0;
}

LandmarkAnnotation single_point(double x, double y) {
    LandmarkAnnotation ann;
    ann.points[landmarks::kLA] = {x, y, 1, true};
    return ann;
}

}  // namespace

TEST_SUITE("augment") {

TEST_CASE("identity parameters leave the frame untouched") {
    const auto frame = noise_frame(1);
    auto out = apply_augmentation(frame, single_point(5.0, 6.0), AugmentationParams{});
    CHECK(identical(out.image, frame));
    CHECK(out.landmarks->points.at(landmarks::kLA).x == 5.0);

    // Zero-width ranges draw the identity too.
    AugmentationRanges none{0.0, 1.0, 1.0, 1.0, 1.0, 0.0};
    CHECK(identical(augment_frame(frame, std::nullopt, none, 9).image, frame));
}

TEST_CASE("scale 2 about the origin doubles coordinates") {
    AugmentationParams p;
    p.scale = 2.0;
    p.pivot = cv::Point2d(0.0, 0.0);
    auto out = apply_augmentation(noise_frame(2), single_point(10.0, 10.0), p);
    const auto& pt = out.landmarks->points.at(landmarks::kLA);
    CHECK(pt.x == 20.0);
    CHECK(pt.y == 20.0);
    CHECK(pt.in_bounds);
}

TEST_CASE("same seed gives bit-identical output") {
    const auto frame = noise_frame(3);
    AugmentationRanges ranges;
    auto a = augment_frame(frame, single_point(30.0, 20.0), ranges, 1234);
    auto b = augment_frame(frame, single_point(30.0, 20.0), ranges, 1234);
    CHECK(identical(a.image, b.image));
    CHECK(a.landmarks->points.at(landmarks::kLA).x == b.landmarks->points.at(landmarks::kLA).x);
    auto c = augment_frame(frame, single_point(30.0, 20.0), ranges, 1235);
    CHECK_FALSE(identical(a.image, c.image));
}

TEST_CASE("landmarks pushed off the frame are marked out of bounds") {
    AugmentationParams p;
    p.tx = 20.0;
    auto out = apply_augmentation(noise_frame(4), single_point(60.0, 10.0), p);
    CHECK_FALSE(out.landmarks->points.at(landmarks::kLA).in_bounds);
    CHECK_FALSE(out.landmarks->scoreable(landmarks::kLA));
}

TEST_CASE("geometric augmentation commutes with landmark targets") {
    std::mt19937_64 rng(77);
    const cv::Size size(64, 64);
    for (int trial = 0; trial < 100; ++trial) {
        const int x = 8 + static_cast<int>(rng() % 24);
        const int y = 8 + static_cast<int>(rng() % 24);
        cv::Mat delta = cv::Mat::zeros(size, CV_8UC1);
        delta.at<std::uint8_t>(y, x) = 255;

        AugmentationParams p;
        p.scale = (rng() % 2) ? 2.0 : 1.0;
        p.pivot = cv::Point2d(static_cast<double>(rng() % 8), static_cast<double>(rng() % 8));
        p.tx = static_cast<double>(static_cast<int>(rng() % 9) - 4);
        p.ty = static_cast<double>(static_cast<int>(rng() % 9) - 4);
        auto out = apply_augmentation(delta, single_point(x, y), p);
        const auto& pt = out.landmarks->points.at(landmarks::kLA);
        if (!pt.in_bounds) continue;

        std::vector<float> v(out.image.begin<std::uint8_t>(), out.image.end<std::uint8_t>());
        const auto decoded = landmarks::decode_index(static_cast<std::int64_t>(landmarks::argmax_index(v)), size.width);
        CHECK(decoded.x == static_cast<int>(pt.x));
        CHECK(decoded.y == static_cast<int>(pt.y));
        CHECK(landmarks::encode_target_index(pt.x, pt.y, size.width, size.height) ==
              static_cast<std::int64_t>(landmarks::argmax_index(v)));
    }
}

}
