// Copyright (C) 2026 The EchoGuide Authors
// SPDX-License-Identifier: Apache-2.0

#include "run_config.hpp"

#include "echoguide/error.hpp"
#include "echoguide/nn/tensor_util.hpp"

namespace echoguide::tools {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path resolve(const fs::path& base, const json& value) {
    fs::path p = value.get<std::string>();
    return p.is_relative() ? base / p : p;
}

std::optional<fs::path> optional_path(const fs::path& base, const json& section, const char* key) {
    if (!section.contains(key) || section.at(key).is_null()) return std::nullopt;
    return resolve(base, section.at(key));
}

json patched(json defaults, const json& section) {
    if (section.contains("model")) defaults.merge_patch(section.at("model"));
    return defaults;
}

ingest::AugmentationRanges parse_ranges(const json& j, ingest::AugmentationRanges r) {
    r.brightness = j.value("brightness", r.brightness);
    r.contrast_min = j.value("contrast_min", r.contrast_min);
    r.contrast_max = j.value("contrast_max", r.contrast_max);
    r.scale_min = j.value("scale_min", r.scale_min);
    r.scale_max = j.value("scale_max", r.scale_max);
    r.translate_fraction = j.value("translate_fraction", r.translate_fraction);
    return r;
}

}  // namespace

RunConfig parse_run_config(const json& j, const fs::path& base) {
    RunConfig c;
    try {
        c.seed = j.value("seed", c.seed);
        if (j.contains("checkpoint_dir")) c.checkpoint_dir = resolve(base, j.at("checkpoint_dir"));
        if (j.contains("echonet")) {
            const auto& e = j.at("echonet");
            EchoNetPaths p;
            p.file_list = resolve(base, e.at("file_list"));
            p.tracings = resolve(base, e.at("tracings"));
            p.aux_landmarks = optional_path(base, e, "aux_landmarks");
            p.video_dir = optional_path(base, e, "video_dir");
            p.default_fps = e.value("default_fps", p.default_fps);
            c.echonet = p;
        }
        c.sweeps = optional_path(base, j, "sweeps");

        const json none = json::object();
        const auto& lm = j.contains("landmarks") ? j.at("landmarks") : none;
        c.landmark_model = landmarks::LandmarkModelConfig::from_json(patched(c.landmark_model.to_json(), lm));
        if (auto enc = optional_path(base, lm, "pretrained_encoder")) c.landmark_model.pretrained_encoder = enc;
        if (lm.contains("train")) {
            const auto& t = lm.at("train");
            auto& tc = c.landmark_train;
            tc.epochs = t.value("epochs", tc.epochs);
            tc.batch_size = t.value("batch_size", tc.batch_size);
            tc.learning_rate = t.value("learning_rate", tc.learning_rate);
            tc.max_steps = t.value("max_steps", tc.max_steps);
            tc.augment = t.value("augment", tc.augment);
            tc.shuffle = t.value("shuffle", tc.shuffle);
            if (t.contains("augmentation")) tc.ranges = parse_ranges(t.at("augmentation"), tc.ranges);
        }

        const auto& ps = j.contains("pose") ? j.at("pose") : none;
        c.pose_model = pose::PoseModelConfig::from_json(patched(c.pose_model.to_json(), ps));
        if (auto dir = optional_path(base, ps, "backbone_dir")) c.pose_model.adapter.backbone_dir = dir;
        c.fold_seed = ps.value("fold_seed", c.fold_seed);
        if (ps.contains("train")) {
            const auto& t = ps.at("train");
            auto& tc = c.pose_train;
            tc.epochs = t.value("epochs", tc.epochs);
            tc.batch_size = t.value("batch_size", tc.batch_size);
            tc.learning_rate = t.value("learning_rate", tc.learning_rate);
            tc.lr_min = t.value("lr_min", tc.lr_min);
            tc.lr_max = t.value("lr_max", tc.lr_max);
            tc.half_cycle_steps = t.value("half_cycle_steps", tc.half_cycle_steps);
            tc.weight_decay = t.value("weight_decay", tc.weight_decay);
            tc.augment = t.value("augment", tc.augment);
            tc.selection_window = t.value("selection_window", tc.selection_window);
            if (t.contains("augmentation")) tc.ranges = parse_ranges(t.at("augmentation"), tc.ranges);
        }

        const auto& lv = j.contains("lvef") ? j.at("lvef") : none;
        c.lvef_model = lvef::LvefModelConfig::from_json(patched(c.lvef_model.to_json(), lv));
        if (lv.contains("train")) {
            const auto& t = lv.at("train");
            auto& tc = c.lvef_train;
            tc.epochs = t.value("epochs", tc.epochs);
            tc.batch_size = t.value("batch_size", tc.batch_size);
            tc.learning_rate = t.value("learning_rate", tc.learning_rate);
            tc.max_steps = t.value("max_steps", tc.max_steps);
        }

        if (j.contains("service")) {
            const auto& s = j.at("service");
            auto& sv = c.service;
            sv.address = s.value("address", sv.address);
            sv.port = s.value("port", sv.port);
            sv.fps = s.value("fps", sv.fps);
            sv.buffer_capacity = s.value("buffer_capacity", sv.buffer_capacity);
            sv.queue_all = s.value("queue_all", sv.queue_all);
            sv.resize_frames = s.value("resize_frames", sv.resize_frames);
            sv.log_dir = optional_path(base, s, "log_dir");
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("run config: ") + e.what());
    }
    c.landmark_train.seed = c.pose_train.seed = c.lvef_train.seed = c.seed;
    return c;
}

RunConfig load_run_config(const fs::path& path) {
    if (path.empty()) return parse_run_config(json::object(), fs::current_path());
    return parse_run_config(nn::read_json(path), fs::absolute(path).parent_path());
}

ingest::EchoNetDataset load_echonet(const RunConfig& config) {
    if (!config.echonet) throw PreconditionError("run config has no echonet section");
    const auto& p = *config.echonet;
    ingest::EchoNetParseOptions options;
    options.video_dir = p.video_dir;
    options.default_fps = p.default_fps;
    options.load_frames = true;
    auto dataset = ingest::parse_echonet_annotations(p.file_list, p.tracings, options);
    if (p.aux_landmarks) ingest::merge_annotations(dataset.annotations, ingest::parse_auxiliary_landmarks(*p.aux_landmarks));
    return dataset;
}

std::vector<ingest::SweepRecording> load_sweeps(const RunConfig& config) {
    if (!config.sweeps) throw PreconditionError("run config has no sweeps manifest");
    return ingest::parse_sweep_manifest(*config.sweeps);
}

}  // namespace echoguide::tools
