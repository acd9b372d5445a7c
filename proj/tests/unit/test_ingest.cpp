// Copyright (C) 2026 The EchoGuide Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <map>
#include <random>
#include <sstream>

#include "doctest.h"
#include "echoguide/error.hpp"
#include "echoguide/ingest.hpp"
#include "echoguide/video_io.hpp"
#include "test_util.hpp"

using namespace echoguide;
using namespace echoguide::ingest;
using echoguide::testing::TempDir;

namespace {

std::string tracing_rows(const std::string& file, int frame, int rows) {
    std::ostringstream out;
    out << "vid.avi,10.1,20.2,30.3,40.4," << frame << "\n";
    for (int r = 1; r < rows; ++r) {
        out << file << "," << r << "," << r + 0.5 << "," << 100 - r << "," << r + 0.5 << "," << frame << "\n";
    }
    return out.str();
}

const char* kFileTable = "FileName,EF,ESV,EDV,FrameHeight,FrameWidth,FPS,NumberOfFrames,Split\n"
                         "vid,55.5,1,2,112,112,50,100,TRAIN\n";

}  // namespace

TEST_SUITE("ingest.echonet") {

TEST_CASE("tracing rows map onto 42 contour landmarks") {
    TempDir dir;
    auto files = dir.write("FileList.csv", kFileTable);
    auto tr = dir.write("VolumeTracings.csv", "FileName,X1,Y1,X2,Y2,Frame\n" + tracing_rows("vid.avi", 46, 21));
    auto ds = parse_echonet_annotations(files, tr);

    REQUIRE(ds.clips.size() == 1);
    CHECK(ds.clips[0].clip_id == "vid");
    CHECK(ds.clips[0].ef_label == doctest::Approx(55.5));
    CHECK(ds.clips[0].fps == 50.0);
    CHECK(ds.clips[0].split == Split::train);

    REQUIRE(ds.annotations.size() == 1);
    const auto& ann = ds.annotations[0];
    CHECK(ann.clip_id == "vid");
    CHECK(ann.frame_index == 46);
    CHECK(ann.points.size() == 42);
    CHECK(ann.points.at(0).x == doctest::Approx(10.1));
    CHECK(ann.points.at(0).y == doctest::Approx(20.2));
    CHECK(ann.points.at(1).x == doctest::Approx(30.3));
    CHECK(ann.points.at(1).y == doctest::Approx(40.4));
    for (const auto& [id, pt] : ann.points) CHECK(pt.visibility == 1);
}

TEST_CASE("a frame with 20 tracing rows is malformed") {
    TempDir dir;
    auto files = dir.write("FileList.csv", kFileTable);
    auto tr = dir.write("VolumeTracings.csv", "FileName,X1,Y1,X2,Y2,Frame\n" + tracing_rows("vid.avi", 46, 20));
    try {
        parse_echonet_annotations(files, tr);
        FAIL("expected MalformedAnnotationError");
    } catch (const MalformedAnnotationError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("vid") != std::string::npos);
        CHECK(msg.find("46") != std::string::npos);
    }
}

TEST_CASE("unknown split token") {
    TempDir dir;
    auto files = dir.write("FileList.csv", "FileName,EF,Split\nvid,50,HOLDOUT\n");
    auto tr = dir.write("VolumeTracings.csv", "FileName,X1,Y1,X2,Y2,Frame\n");
    CHECK_THROWS_AS(parse_echonet_annotations(files, tr), ParseError);
}

}

TEST_SUITE("ingest.auxiliary") {

TEST_CASE("auxiliary rows") {
    TempDir dir;
    auto aux = dir.write("aux.csv", "FileName,Frame,Landmark,X,Y,Visibility\nvid.avi,46,LA,55,90,2\n");
    auto anns = parse_auxiliary_landmarks(aux);
    REQUIRE(anns.size() == 1);
    const auto& pt = anns[0].points.at(landmarks::kLA);
    CHECK(pt.x == 55.0);
    CHECK(pt.y == 90.0);
    CHECK(pt.visibility == 2);
}

TEST_CASE("auxiliary errors") {
    TempDir dir;
    SUBCASE("visibility out of domain") {
        auto aux = dir.write("aux.csv", "FileName,Frame,Landmark,X,Y,Visibility\nvid.avi,46,LA,55,90,4\n");
        CHECK_THROWS_AS(parse_auxiliary_landmarks(aux), ParseError);
    }
    SUBCASE("unknown landmark") {
        auto aux = dir.write("aux.csv", "FileName,Frame,Landmark,X,Y,Visibility\nvid.avi,46,AO,55,90,1\n");
        CHECK_THROWS_AS(parse_auxiliary_landmarks(aux), ParseError);
    }
    SUBCASE("duplicate row names the landmark") {
        auto aux = dir.write("aux.csv",
                             "FileName,Frame,Landmark,X,Y,Visibility\nvid.avi,46,RV,1,2,1\nvid.avi,46,RV,3,4,1\n");
        try {
            parse_auxiliary_landmarks(aux);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find("RV") != std::string::npos);
        }
    }
}

TEST_CASE("auxiliary annotations merge with contour frames") {
    TempDir dir;
    auto files = dir.write("FileList.csv", kFileTable);
    auto tr = dir.write("VolumeTracings.csv", "FileName,X1,Y1,X2,Y2,Frame\n" + tracing_rows("vid.avi", 46, 21));
    auto aux = dir.write("aux.csv",
                         "FileName,Frame,Landmark,X,Y,Visibility\n"
                         "vid.avi,46,LA,55,90,2\nvid.avi,46,TVA,10,11,3\nvid.avi,7,RV,1,1,1\n");
    auto ds = parse_echonet_annotations(files, tr);
    merge_annotations(ds.annotations, parse_auxiliary_landmarks(aux));
    REQUIRE(ds.annotations.size() == 2);
    CHECK(ds.annotations[0].points.size() == 44);
    CHECK(ds.annotations[1].frame_index == 7);
    CHECK_THROWS_AS(merge_annotations(ds.annotations, parse_auxiliary_landmarks(aux)), ParseError);
}

}

TEST_SUITE("ingest.sweeps") {

namespace {

std::filesystem::path write_sweep(const TempDir& dir, std::size_t frames, const std::string& labels_json,
                                  const std::string& extra = "") {
    std::vector<cv::Mat> imgs(frames, cv::Mat(16, 16, CV_8UC1, cv::Scalar(90)));
    video::write_frames(dir / "s.avi", imgs, 30.0);
    return dir.write("manifest.json", R"([{"subject_id":"s1","sweep_id":"sw1","device":"Clarius","fps":30,)"
                                      R"("video":"s.avi","labels":)" +
                                          labels_json + extra + "}]");
}

std::string repeat_labels(std::size_t n) {
    std::string out = "[";
    for (std::size_t i = 0; i < n; ++i) out += std::string(i ? "," : "") + (i < n / 2 ? "\"green\"" : "\"red\"");
    return out + "]";
}

}  // namespace

TEST_CASE("300-frame sweep") {
    TempDir dir;
    auto m = write_sweep(dir, 300, repeat_labels(300));
    auto sweeps = parse_sweep_manifest(m);
    REQUIRE(sweeps.size() == 1);
    CHECK(sweeps[0].size() == 300);
    CHECK(sweeps[0].frames.size() == 300);
    CHECK(sweeps[0].subject_id == "s1");
}

TEST_CASE("label count must match frame count") {
    TempDir dir;
    auto m = write_sweep(dir, 10, repeat_labels(9));
    CHECK_THROWS_AS(parse_sweep_manifest(m), ParseError);
}

TEST_CASE("empty label list") {
    TempDir dir;
    auto m = write_sweep(dir, 3, "[]");
    CHECK_THROWS_AS(parse_sweep_manifest(m, {.load_video = false}), ParseError);
}

TEST_CASE("deductions inconsistent with a green label") {
    TempDir dir;
    auto m = write_sweep(dir, 2, R"(["green","green"])",
                         R"(,"deductions":[[],["LV_FREE_WALL_NOT_VISIBLE","LA_PARTIALLY_OUT"]])");
    try {
        parse_sweep_manifest(m);
        FAIL("expected ConsistencyError");
    } catch (const ConsistencyError& e) {
        CHECK(std::string(e.what()).find("frame 1") != std::string::npos);
        CHECK(std::string(e.what()).find("red") != std::string::npos);
    }
}

TEST_CASE("sweeps must start green") {
    TempDir dir;
    auto m = write_sweep(dir, 2, R"(["yellow","red"])");
    CHECK_THROWS_AS(parse_sweep_manifest(m), ConsistencyError);
}

TEST_CASE("manifest serialization round-trips") {
    TempDir dir;
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        SweepRecording s;
        s.subject_id = "subj" + std::to_string(trial);
        s.sweep_id = "sw" + std::to_string(trial);
        s.device = trial % 2 ? "Philips Lumify" : "Clarius PAL HD3";
        s.fps = std::uniform_real_distribution<double>(10.0, 60.0)(rng);
        s.video_path = dir / ("v" + std::to_string(trial) + ".avi");
        const std::size_t n = 1 + rng() % 30;
        std::vector<std::vector<rubric::Criterion>> ded;
        for (std::size_t i = 0; i < n; ++i) {
            const auto cat = i == 0 ? PoseCategory::green : static_cast<PoseCategory>(rng() % 3);
            s.frame_categories.push_back(cat);
            if (cat == PoseCategory::green) ded.push_back({});
            if (cat == PoseCategory::yellow) ded.push_back({rubric::Criterion::AORTA_VISIBLE_5CH});
            if (cat == PoseCategory::red) ded.push_back({rubric::Criterion::LA_ENTIRELY_OUT});
        }
        if (trial % 3) s.frame_deductions = ded;

        std::vector<SweepRecording> one = {s};
        auto path = dir.write("m.json", serialize_sweep_manifest(one, dir.path()));
        auto back = parse_sweep_manifest(path, {.load_video = false});
        REQUIRE(back.size() == 1);
        CHECK(back[0].subject_id == s.subject_id);
        CHECK(back[0].sweep_id == s.sweep_id);
        CHECK(back[0].device == s.device);
        CHECK(back[0].fps == s.fps);
        CHECK(back[0].video_path == s.video_path);
        CHECK(back[0].frame_categories == s.frame_categories);
        CHECK(back[0].frame_deductions == s.frame_deductions);
    }
}

}

TEST_SUITE("ingest.scores") {

TEST_CASE("continuous score examples") {
    using C = PoseCategory;
    const std::vector<C> ggg = {C::green, C::green, C::green};
    CHECK(assign_continuous_scores(ggg) == std::vector<double>{1.0, 0.5, 0.0});
    const std::vector<C> y = {C::yellow};
    CHECK(assign_continuous_scores(y) == std::vector<double>{-0.5});
    const std::vector<C> mixed = {C::green, C::green, C::yellow, C::yellow, C::red, C::red};
    CHECK(assign_continuous_scores(mixed) == std::vector<double>{1.0, 0.0, 0.0, -1.0, -1.0, -2.0});
}

TEST_CASE("scores stay inside their category range and decrease within runs") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<PoseCategory> cats(1 + rng() % 80);
        for (auto& c : cats) c = static_cast<PoseCategory>(rng() % 3);
        const auto scores = assign_continuous_scores(cats);
        for (std::size_t i = 0; i < cats.size(); ++i) {
            switch (cats[i]) {
                case PoseCategory::green: CHECK((scores[i] >= 0.0 && scores[i] <= 1.0)); break;
                case PoseCategory::yellow: CHECK((scores[i] >= -1.0 && scores[i] <= 0.0)); break;
                case PoseCategory::red: CHECK((scores[i] >= -2.0 && scores[i] <= -1.0)); break;
            }
            if (i > 0 && cats[i] == cats[i - 1]) CHECK(scores[i] <= scores[i - 1]);
        }
    }
}

}

TEST_SUITE("ingest.folds") {

namespace {
std::vector<std::string> subjects(std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back("s" + std::to_string(i));
    return out;
}
}  // namespace

TEST_CASE("nine subjects give 2/1/6 folds") {
    const auto ids = subjects(9);
    const auto folds = make_subject_folds(ids, 42);
    REQUIRE(folds.size() == 5);
    std::map<std::string, int> test_uses;
    for (const auto& f : folds) {
        CHECK(f.test_subjects.size() == 2);
        CHECK(f.val_subjects.size() == 1);
        CHECK(f.train_subjects.size() == 6);
        for (const auto& s : f.test_subjects) ++test_uses[s];
    }
    // 10 test slots over 9 subjects: everyone tested once, one subject twice.
    CHECK(test_uses.size() == 9);
    int twice = 0;
    for (const auto& [s, n] : test_uses) twice += n == 2;
    CHECK(twice == 1);
}

TEST_CASE("folds are subject-disjoint for every subject count") {
    for (std::size_t n = 4; n <= 16; ++n) {
        const auto ids = subjects(n);
        for (std::uint64_t seed : {0ull, 1ull, 99ull}) {
            for (const auto& f : make_subject_folds(ids, seed)) {
                for (const auto& s : f.test_subjects) {
                    CHECK_FALSE(f.val_subjects.count(s));
                    CHECK_FALSE(f.train_subjects.count(s));
                }
                for (const auto& s : f.val_subjects) CHECK_FALSE(f.train_subjects.count(s));
                CHECK(f.test_subjects.size() + f.val_subjects.size() + f.train_subjects.size() == n);
            }
        }
    }
}

TEST_CASE("fold plans are deterministic per seed") {
    const auto ids = subjects(9);
    const auto a = make_subject_folds(ids, 5);
    const auto b = make_subject_folds(ids, 5);
    for (int k = 0; k < 5; ++k) {
        CHECK(a[k].test_subjects == b[k].test_subjects);
        CHECK(a[k].val_subjects == b[k].val_subjects);
    }
}

TEST_CASE("fewer than four subjects") {
    const auto ids = subjects(3);
    CHECK_THROWS_AS(make_subject_folds(ids), InsufficientSubjectsError);
}

}
