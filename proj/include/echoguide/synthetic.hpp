// Copyright (C) 2026 The EchoGuide Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include <opencv2/core.hpp>

#include "echoguide/ingest.hpp"

// Procedural stand-ins for the clinical data: A4CH-like frames with known
// landmarks, category-textured sweep frames and EF-coded clips.
namespace echoguide::synthetic {

struct LandmarkFrame {
    cv::Mat image;
    ingest::LandmarkAnnotation annotation;  // all 47 landmarks
};

/// Bright LV ellipse outline (42 contour points, long axis first) plus five
/// auxiliary markers on a noisy background.
LandmarkFrame make_landmark_frame(std::mt19937_64& rng, cv::Size size);

/// The 21 tracing rows (x1, y1, x2, y2) whose endpoints are contour ids 0..41.
std::vector<cv::Vec4d> tracing_rows(const ingest::LandmarkAnnotation& annotation);

/// Frame whose texture identifies the category (horizontal stripes, vertical
/// stripes, checkerboard for green, yellow, red) with random phase and noise.
cv::Mat make_pose_frame(PoseCategory category, std::mt19937_64& rng, cv::Size size);

/// Clip whose mean brightness encodes `ef` (percent) with a beating disc.
std::vector<cv::Mat> make_ef_clip(double ef, std::size_t frames, cv::Size size, std::mt19937_64& rng);

/// Brightness level used by make_ef_clip for a given EF.
double ef_to_intensity(double ef);

/// Green run, then yellow, then red, with random run lengths summing to `frames`.
std::vector<PoseCategory> make_sweep_labels(std::size_t frames, std::mt19937_64& rng);

/// A deduction set consistent with the category under the rubric.
std::vector<rubric::Criterion> deductions_for(PoseCategory category, std::mt19937_64& rng);

struct CorpusOptions {
    std::size_t clips = 12;
    std::size_t frames_per_clip = 40;
    cv::Size frame_size{64, 64};
    std::size_t subjects = 9;
    std::size_t sweeps_per_subject = 2;
    std::size_t frames_per_sweep = 60;
    double sweep_fps = 30.0;
    std::uint64_t seed = 7;
};

/// Writes an EchoNet-style corpus and a sweep manifest under `root`:
///   FileList.csv, VolumeTracings.csv, AuxLandmarks.csv, Videos/*.avi,
///   sweeps/manifest.json, sweeps/*.avi
void write_corpus(const std::filesystem::path& root, const CorpusOptions& options = {});

}  // namespace echoguide::synthetic
