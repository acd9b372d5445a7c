// Copyright (C) 2026 The EchoGuide Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <opencv2/core.hpp>

#include "echoguide/landmark_schema.hpp"
#include "echoguide/rubric.hpp"

namespace echoguide::ingest {

enum class Split { train, val, test };

std::string_view to_string(Split s);

/// One EchoNet-style video with its ejection-fraction label. Frames are
/// 8-bit single-channel images and stay empty until loaded.
struct EchoNetClip {
    std::string clip_id;
    std::filesystem::path video_path;
    std::vector<cv::Mat> frames;
    double fps = 50.0;
    double ef_label = 0.0;
    Split split = Split::train;

    /// Decodes video_path into frames (no-op if already loaded).
    void load_frames();
};

struct AnnotatedPoint {
    double x = 0.0;
    double y = 0.0;
    int visibility = 1;  // 1 high, 2 moderate, 3 low confidence
    bool in_bounds = true;
};

/// Annotated subset of the 47 landmarks on one frame.
struct LandmarkAnnotation {
    std::string clip_id;
    int frame_index = 0;
    std::map<landmarks::LandmarkId, AnnotatedPoint> points;

    /// Annotated and still inside the frame.
    bool scoreable(landmarks::LandmarkId id) const {
        auto it = points.find(id);
        return it != points.end() && it->second.in_bounds;
    }
};

struct EchoNetDataset {
    std::vector<EchoNetClip> clips;
    std::vector<LandmarkAnnotation> annotations;

    const EchoNetClip* find_clip(const std::string& clip_id) const;
};

struct EchoNetParseOptions {
    /// Directory holding <clip_id>.avi; defaults to "<file_table dir>/Videos".
    std::optional<std::filesystem::path> video_dir;
    bool load_frames = false;
    /// Used when the file table has no FPS column.
    double default_fps = 50.0;
};

/// Reads a FileList-style table (FileName, EF, Split[, FPS]) and a
/// VolumeTracings-style table (FileName, X1, Y1, X2, Y2, Frame). Each traced
/// frame must carry exactly 21 rows, yielding the 42 LV contour landmarks.
EchoNetDataset parse_echonet_annotations(const std::filesystem::path& file_table,
                                         const std::filesystem::path& tracing_table,
                                         const EchoNetParseOptions& options = {});

/// Reads (FileName, Frame, Landmark, X, Y, Visibility) rows for the RV, RA,
/// LA, TV and TVA landmarks.
std::vector<LandmarkAnnotation> parse_auxiliary_landmarks(const std::filesystem::path& aux_table);

/// Merges auxiliary annotations into `base`, matching on (clip, frame).
/// Frames without a contour annotation are appended. Throws ParseError if a
/// landmark is annotated twice for the same frame.
void merge_annotations(std::vector<LandmarkAnnotation>& base,
                       const std::vector<LandmarkAnnotation>& extra);

struct SweepRecording {
    std::string subject_id;
    std::string sweep_id;
    std::string device;
    double fps = 30.0;
    std::filesystem::path video_path;
    std::vector<cv::Mat> frames;
    std::vector<PoseCategory> frame_categories;
    std::optional<std::vector<std::vector<rubric::Criterion>>> frame_deductions;

    std::size_t size() const { return frame_categories.size(); }
};

struct SweepParseOptions {
    /// Decode the referenced videos and check label count against frame count.
    bool load_video = true;
};

/// Parses a JSON manifest: either an array of sweep objects or an object with
/// a "sweeps" array. Relative video paths resolve against the manifest's
/// directory.
std::vector<SweepRecording> parse_sweep_manifest(const std::filesystem::path& manifest,
                                                 const SweepParseOptions& options = {});

/// Serializes sweeps to manifest JSON text. Video paths are written relative
/// to `base_dir` when they live beneath it.
std::string serialize_sweep_manifest(std::span<const SweepRecording> sweeps,
                                     const std::filesystem::path& base_dir);

/// Checks the label invariants of a sweep (non-empty, first frame green,
/// deductions consistent with labels). Throws ParseError/ConsistencyError.
void validate_sweep(const SweepRecording& sweep);

/// Per-run linear interpolation of the categories onto the continuous score
/// axis: green 1 -> 0, yellow 0 -> -1, red -1 -> -2. Singletons get the
/// midpoint of their category range.
std::vector<double> assign_continuous_scores(std::span<const PoseCategory> categories);

inline std::vector<double> assign_continuous_scores(const SweepRecording& sweep) {
    return assign_continuous_scores(sweep.frame_categories);
}

struct FoldPlan {
    int fold_index = 0;
    std::set<std::string> test_subjects;
    std::set<std::string> val_subjects;
    std::set<std::string> train_subjects;
};

inline constexpr int kNumFolds = 5;

/// Subject-level 5-fold plan: 2 test, 1 validation, the rest training.
/// Needs at least 4 subjects. With fewer than 10 subjects the missing test
/// slots are filled with subjects in lexicographic order.
std::vector<FoldPlan> make_subject_folds(std::span<const std::string> subject_ids,
                                         std::uint64_t seed = 0);

}  // namespace echoguide::ingest
