// Copyright (C) 2026 The EchoGuide Authors
// SPDX-License-Identifier: Apache-2.0

#include "echoguide/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <random>
#include <utility>

#include <nlohmann/json.hpp>

#include "csv_table.hpp"
#include "echoguide/error.hpp"
#include "echoguide/video_io.hpp"

namespace echoguide::ingest {

namespace fs = std::filesystem;
using json = nlohmann::json;
using landmarks::LandmarkId;

namespace {

constexpr int kTracingRowsPerFrame = 21;

std::string clip_id_from_filename(const std::string& name) {
    fs::path p(name);
    return p.has_extension() ? p.stem().string() : name;
}

Split parse_split(const std::string& token, const std::string& where) {
    std::string t;
    for (char ch : token) t.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    if (t == "train") return Split::train;
    if (t == "val" || t == "validation") return Split::val;
    if (t == "test") return Split::test;
    throw ParseError(where + ": unknown split token '" + token + "'");
}

using FrameKey = std::pair<std::string, int>;

}  // namespace

std::string_view to_string(Split s) {
    switch (s) {
        case Split::train: return "TRAIN";
        case Split::val: return "VAL";
        case Split::test: return "TEST";
    }
    return "UNKNOWN";
}

void EchoNetClip::load_frames() {
    if (!frames.empty()) return;
    frames = video::read_frames(video_path);
    if (frames.empty()) throw ParseError("video has no frames: " + video_path.string());
    const auto size = frames.front().size();
    for (const auto& f : frames) {
        if (f.size() != size) throw ShapeError("clip " + clip_id + " has frames of varying size");
    }
}

const EchoNetClip* EchoNetDataset::find_clip(const std::string& clip_id) const {
    for (const auto& c : clips) {
        if (c.clip_id == clip_id) return &c;
    }
    return nullptr;
}

EchoNetDataset parse_echonet_annotations(const fs::path& file_table, const fs::path& tracing_table,
                                         const EchoNetParseOptions& options) {
    EchoNetDataset out;
    const fs::path video_dir = options.video_dir.value_or(file_table.parent_path() / "Videos");

    const auto files = detail::CsvTable::read(file_table);
    const auto c_name = files.column("FileName");
    const auto c_ef = files.column("EF");
    const auto c_split = files.column("Split");
    const bool has_fps = files.has_column("FPS");
    for (std::size_t r = 0; r < files.rows(); ++r) {
        EchoNetClip clip;
        clip.clip_id = clip_id_from_filename(files.cell(r, c_name));
        clip.video_path = video_dir / (clip.clip_id + ".avi");
        clip.ef_label = files.number(r, c_ef);
        if (clip.ef_label < 0.0 || clip.ef_label > 100.0) {
            throw ParseError(files.where(r) + ": EF outside [0, 100]");
        }
        clip.split = parse_split(files.cell(r, c_split), files.where(r));
        clip.fps = has_fps ? files.number(r, files.column("FPS")) : options.default_fps;
        if (!(clip.fps > 0.0)) throw ParseError(files.where(r) + ": fps must be positive");
        if (options.load_frames) clip.load_frames();
        out.clips.push_back(std::move(clip));
    }

    const auto tracings = detail::CsvTable::read(tracing_table);
    const auto t_name = tracings.column("FileName");
    const auto t_x1 = tracings.column("X1");
    const auto t_y1 = tracings.column("Y1");
    const auto t_x2 = tracings.column("X2");
    const auto t_y2 = tracings.column("Y2");
    const auto t_frame = tracings.column("Frame");

    std::vector<FrameKey> order;
    std::map<FrameKey, std::vector<std::size_t>> groups;
    for (std::size_t r = 0; r < tracings.rows(); ++r) {
        const long frame = tracings.integer(r, t_frame);
        if (frame < 0) throw ParseError(tracings.where(r) + ": negative frame index");
        FrameKey key{clip_id_from_filename(tracings.cell(r, t_name)), static_cast<int>(frame)};
        auto [it, inserted] = groups.try_emplace(key);
        if (inserted) order.push_back(key);
        it->second.push_back(r);
    }

    for (const auto& key : order) {
        const auto& rows = groups[key];
        if (rows.size() != kTracingRowsPerFrame) {
            throw MalformedAnnotationError("clip " + key.first + " frame " + std::to_string(key.second) +
                                           " has " + std::to_string(rows.size()) +
                                           " tracing rows, expected " +
                                           std::to_string(kTracingRowsPerFrame));
        }
        LandmarkAnnotation ann;
        ann.clip_id = key.first;
        ann.frame_index = key.second;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto r = rows[i];
            const auto id = static_cast<LandmarkId>(2 * i);
            ann.points[id] = {tracings.number(r, t_x1), tracings.number(r, t_y1), 1, true};
            ann.points[id + 1] = {tracings.number(r, t_x2), tracings.number(r, t_y2), 1, true};
        }
        out.annotations.push_back(std::move(ann));
    }
    return out;
}

std::vector<LandmarkAnnotation> parse_auxiliary_landmarks(const fs::path& aux_table) {
    const auto table = detail::CsvTable::read(aux_table);
    const auto c_name = table.column("FileName");
    const auto c_frame = table.column("Frame");
    const auto c_lm = table.column("Landmark");
    const auto c_x = table.column("X");
    const auto c_y = table.column("Y");
    const auto c_vis = table.column("Visibility");

    std::vector<LandmarkAnnotation> out;
    std::map<FrameKey, std::size_t> index;
    for (std::size_t r = 0; r < table.rows(); ++r) {
        const auto& name = table.cell(r, c_lm);
        auto id = landmarks::parse_landmark_name(name);
        if (!id || *id < landmarks::kNumContour) {
            throw ParseError(table.where(r) + ": unknown landmark '" + name + "'");
        }
        const long vis = table.integer(r, c_vis);
        if (vis < 1 || vis > 3) {
            throw ParseError(table.where(r) + ": visibility must be 1, 2 or 3, got " + std::to_string(vis));
        }
        const long frame = table.integer(r, c_frame);
        if (frame < 0) throw ParseError(table.where(r) + ": negative frame index");
        FrameKey key{clip_id_from_filename(table.cell(r, c_name)), static_cast<int>(frame)};
        auto [it, inserted] = index.try_emplace(key, out.size());
        if (inserted) {
            LandmarkAnnotation ann;
            ann.clip_id = key.first;
            ann.frame_index = key.second;
            out.push_back(std::move(ann));
        }
        auto& ann = out[it->second];
        if (ann.points.count(*id)) {
            throw ParseError(table.where(r) + ": duplicate landmark " + name + " for clip " + key.first +
                             " frame " + std::to_string(key.second));
        }
        ann.points[*id] = {table.number(r, c_x), table.number(r, c_y), static_cast<int>(vis), true};
    }
    return out;
}

void merge_annotations(std::vector<LandmarkAnnotation>& base, const std::vector<LandmarkAnnotation>& extra) {
    std::map<FrameKey, std::size_t> index;
    for (std::size_t i = 0; i < base.size(); ++i) index[{base[i].clip_id, base[i].frame_index}] = i;
    for (const auto& ann : extra) {
        FrameKey key{ann.clip_id, ann.frame_index};
        auto it = index.find(key);
        if (it == index.end()) {
            index[key] = base.size();
            base.push_back(ann);
            continue;
        }
        auto& target = base[it->second];
        for (const auto& [id, pt] : ann.points) {
            if (!target.points.emplace(id, pt).second) {
                throw ParseError("duplicate landmark " + landmarks::landmark_name(id) + " for clip " +
                                 key.first + " frame " + std::to_string(key.second));
            }
        }
    }
}

void validate_sweep(const SweepRecording& sweep) {
    const std::string who = "sweep " + sweep.sweep_id + " (subject " + sweep.subject_id + ")";
    if (sweep.frame_categories.empty()) throw ParseError(who + ": empty label list");
    if (!sweep.frames.empty() && sweep.frames.size() != sweep.frame_categories.size()) {
        throw ParseError(who + ": " + std::to_string(sweep.frame_categories.size()) + " labels for " +
                         std::to_string(sweep.frames.size()) + " frames");
    }
    if (!(sweep.fps > 0.0)) throw ParseError(who + ": fps must be positive");
    if (sweep.frame_categories.front() != PoseCategory::green) {
        throw ConsistencyError(who + ": first frame must be green (sweeps start at the optimal pose)");
    }
    if (sweep.frame_deductions) {
        const auto& ded = *sweep.frame_deductions;
        if (ded.size() != sweep.frame_categories.size()) {
            throw ParseError(who + ": deduction list length differs from label count");
        }
        for (std::size_t i = 0; i < ded.size(); ++i) {
            const auto expected = rubric::categorize(rubric::total_deduction(ded[i]));
            if (expected != sweep.frame_categories[i]) {
                throw ConsistencyError(who + " frame " + std::to_string(i) + ": labeled " +
                                       std::string(to_string(sweep.frame_categories[i])) +
                                       " but deductions give " + std::string(to_string(expected)));
            }
        }
    }
}

namespace {

template <typename T>
T require(const json& obj, const char* field, const std::string& who) {
    if (!obj.contains(field)) throw ParseError(who + ": missing field '" + field + "'");
    try {
        return obj.at(field).get<T>();
    } catch (const json::exception& e) {
        throw ParseError(who + ": field '" + field + "': " + e.what());
    }
}

SweepRecording sweep_from_json(const json& obj, const fs::path& base_dir, std::size_t position,
                               const SweepParseOptions& options) {
    const std::string who = "manifest entry " + std::to_string(position);
    if (!obj.is_object()) throw ParseError(who + ": expected an object");
    SweepRecording s;
    s.subject_id = require<std::string>(obj, "subject_id", who);
    s.sweep_id = require<std::string>(obj, "sweep_id", who);
    s.device = require<std::string>(obj, "device", who);
    s.fps = require<double>(obj, "fps", who);
    fs::path video = require<std::string>(obj, "video", who);
    s.video_path = video.is_absolute() ? video : base_dir / video;

    for (const auto& label : require<std::vector<std::string>>(obj, "labels", who)) {
        auto cat = parse_category(label);
        if (!cat) throw ParseError(who + ": unknown category '" + label + "'");
        s.frame_categories.push_back(*cat);
    }
    if (obj.contains("deductions") && !obj["deductions"].is_null()) {
        std::vector<std::vector<rubric::Criterion>> ded;
        for (const auto& frame : require<std::vector<std::vector<std::string>>>(obj, "deductions", who)) {
            auto& row = ded.emplace_back();
            for (const auto& token : frame) {
                auto c = rubric::parse_criterion(token);
                if (!c) throw ParseError(who + ": unknown criterion '" + token + "'");
                row.push_back(*c);
            }
        }
        s.frame_deductions = std::move(ded);
    }
    if (options.load_video) s.frames = video::read_frames(s.video_path);
    validate_sweep(s);
    return s;
}

}  // namespace

std::vector<SweepRecording> parse_sweep_manifest(const fs::path& manifest, const SweepParseOptions& options) {
    std::ifstream in(manifest);
    if (!in) throw ParseError("cannot open manifest " + manifest.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(manifest.string() + ": " + e.what());
    }
    const json* list = &doc;
    if (doc.is_object() && doc.contains("sweeps")) list = &doc["sweeps"];
    if (!list->is_array()) throw ParseError(manifest.string() + ": expected an array of sweeps");

    std::vector<SweepRecording> out;
    for (std::size_t i = 0; i < list->size(); ++i) {
        out.push_back(sweep_from_json((*list)[i], manifest.parent_path(), i, options));
    }
    return out;
}

std::string serialize_sweep_manifest(std::span<const SweepRecording> sweeps, const fs::path& base_dir) {
    json doc = json::array();
    for (const auto& s : sweeps) {
        json obj;
        obj["subject_id"] = s.subject_id;
        obj["sweep_id"] = s.sweep_id;
        obj["device"] = s.device;
        obj["fps"] = s.fps;
        auto rel = s.video_path.lexically_relative(base_dir);
        const bool inside = !rel.empty() && *rel.begin() != "..";
        obj["video"] = (inside ? rel : s.video_path).generic_string();
        json labels = json::array();
        for (auto c : s.frame_categories) labels.push_back(std::string(to_string(c)));
        obj["labels"] = std::move(labels);
        if (s.frame_deductions) {
            json ded = json::array();
            for (const auto& frame : *s.frame_deductions) {
                json row = json::array();
                for (auto c : frame) row.push_back(std::string(rubric::to_string(c)));
                ded.push_back(std::move(row));
            }
            obj["deductions"] = std::move(ded);
        }
        doc.push_back(std::move(obj));
    }
    return doc.dump(2);
}

std::vector<double> assign_continuous_scores(std::span<const PoseCategory> categories) {
    std::vector<double> scores(categories.size());
    std::size_t start = 0;
    while (start < categories.size()) {
        std::size_t end = start;
        while (end < categories.size() && categories[end] == categories[start]) ++end;
        // Category range [hi -> lo]: green 1..0, yellow 0..-1, red -1..-2.
        const double hi = static_cast<double>(index_of(categories[start])) - 1.0;
        const double lo = hi - 1.0;
        const std::size_t n = end - start;
        if (n == 1) {
            scores[start] = 0.5 * (hi + lo);
        } else {
            for (std::size_t i = 0; i < n; ++i) {
                scores[start + i] = hi + (lo - hi) * static_cast<double>(i) / static_cast<double>(n - 1);
            }
        }
        start = end;
    }
    return scores;
}

std::vector<FoldPlan> make_subject_folds(std::span<const std::string> subject_ids, std::uint64_t seed) {
    std::vector<std::string> sorted(subject_ids.begin(), subject_ids.end());
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    const std::size_t n = sorted.size();
    if (n < 4) {
        throw InsufficientSubjectsError("need at least 4 subjects for 5-fold cross validation, got " +
                                        std::to_string(n));
    }

    std::vector<std::string> order = sorted;
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    constexpr std::size_t kSlots = 2 * kNumFolds;
    std::vector<std::string> slots(kSlots);
    const std::size_t direct = std::min(n, kSlots);
    for (std::size_t i = 0; i < direct; ++i) slots[i] = order[i];
    std::size_t reuse = 0;
    for (std::size_t i = direct; i < kSlots; ++i) {
        const std::string* partner = (i % 2 == 1) ? &slots[i - 1] : nullptr;
        while (partner && sorted[reuse % n] == *partner) ++reuse;
        slots[i] = sorted[reuse % n];
        ++reuse;
    }

    std::vector<FoldPlan> folds;
    for (int k = 0; k < kNumFolds; ++k) {
        FoldPlan plan;
        plan.fold_index = k;
        plan.test_subjects = {slots[2 * k], slots[2 * k + 1]};
        for (std::size_t step = 0; step < n; ++step) {
            const auto& candidate = order[(2 * static_cast<std::size_t>(k) + 2 + step) % n];
            if (!plan.test_subjects.count(candidate)) {
                plan.val_subjects.insert(candidate);
                break;
            }
        }
        for (const auto& s : sorted) {
            if (!plan.test_subjects.count(s) && !plan.val_subjects.count(s)) plan.train_subjects.insert(s);
        }
        folds.push_back(std::move(plan));
    }
    return folds;
}

}  // namespace echoguide::ingest
