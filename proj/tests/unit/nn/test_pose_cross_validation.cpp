// Copyright (C) 2026 The EchoGuide Authors
// SPDX-License-Identifier: Apache-2.0

#include <random>

#include "../test_util.hpp"
#include "echoguide/error.hpp"
#include "echoguide/nn/pose_cross_validation.hpp"
#include "echoguide/synthetic.hpp"
#include "torch_doctest.hpp"

using namespace echoguide;
using namespace echoguide::pose;

namespace {

std::vector<ingest::SweepRecording> tiny_sweeps(std::size_t subjects, std::size_t frames) {
    std::mt19937_64 rng(11);
    std::vector<ingest::SweepRecording> out;
    for (std::size_t s = 0; s < subjects; ++s) {
        ingest::SweepRecording sweep;
        sweep.subject_id = "S" + std::to_string(s);
        sweep.sweep_id = sweep.subject_id + "_a";
        sweep.frame_categories = synthetic::make_sweep_labels(frames, rng);
        for (auto c : sweep.frame_categories) sweep.frames.push_back(synthetic::make_pose_frame(c, rng, {32, 32}));
        out.push_back(std::move(sweep));
    }
    return out;
}

CrossValidationConfig tiny_config() {
    CrossValidationConfig c;
    c.model.mode = InputMode::images_only;
    c.model.width_multiplier = 0.125;
    c.model.input_height = c.model.input_width = 32;
    c.train.epochs = 2;
    c.train.batch_size = 16;
    c.train.augment = false;
    return c;
}

}  // namespace

TEST_SUITE("pose.cross_validation") {

TEST_CASE("sweep samples carry interpolated scores") {
    auto sweeps = tiny_sweeps(1, 20);
    auto samples = sweep_samples(sweeps[0], nullptr);
    REQUIRE(samples.size() == 20);
    const auto scores = ingest::assign_continuous_scores(sweeps[0]);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        CHECK(samples[i].score == scores[i]);
        CHECK(samples[i].category == sweeps[0].frame_categories[i]);
        CHECK(samples[i].landmarks.empty());
    }
    sweeps[0].frames.pop_back();
    CHECK_THROWS_AS(sweep_samples(sweeps[0], nullptr), ConsistencyError);
}

TEST_CASE("five folds over nine subjects with reports on disk") {
    testing::TempDir dir;
    auto sweeps = tiny_sweeps(9, 12);
    auto config = tiny_config();
    config.output_dir = dir / "cv";
    std::size_t callbacks = 0;
    auto result = cross_validate_pose(sweeps, nullptr, config, [&](const FoldRun&) { ++callbacks; });
    REQUIRE(result.folds.size() == 5);
    CHECK(callbacks == 5);
    for (const auto& fold : result.folds) {
        CHECK(fold.report.at("test_subjects").size() == 2);
        CHECK(fold.report.at("val_subjects").size() == 1);
        CHECK(fold.train_frames == 6 * 12);
        CHECK(fold.val_frames == 12);
        CHECK(fold.result.total() == 24);
        CHECK(std::filesystem::exists(dir / "cv" / ("fold_" + std::to_string(fold.result.fold_index)) / "report.json"));
    }
    CHECK(std::filesystem::exists(dir / "cv" / "aggregate.json"));
    CHECK(result.aggregate.is_object());
}

TEST_CASE("landmark modes need a detector") {
    auto sweeps = tiny_sweeps(4, 6);
    auto config = tiny_config();
    config.model.mode = InputMode::images_and_landmarks;
    CHECK_THROWS_AS(cross_validate_pose(sweeps, nullptr, config), PreconditionError);
}

}
