// Copyright (C) 2026 The EchoGuide Authors
// SPDX-License-Identifier: Apache-2.0

#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "echoguide/error.hpp"
#include "echoguide/synthetic.hpp"

using namespace echoguide;
using nlohmann::json;

// Demo run configuration sized for the synthetic corpus and a laptop CPU.
json demo_config(const synthetic::CorpusOptions& o) {
    const json hw = {o.frame_size.height, o.frame_size.width};
    return {{"seed", o.seed},
            {"checkpoint_dir", "checkpoints"},
            {"echonet",
             {{"file_list", "FileList.csv"},
              {"tracings", "VolumeTracings.csv"},
              {"aux_landmarks", "AuxLandmarks.csv"},
              {"video_dir", "Videos"}}},
            {"sweeps", "sweeps/manifest.json"},
            {"landmarks",
             {{"model", {{"encoder_depth", 18}, {"width_multiplier", 0.25}, {"input_hw", hw}}},
              {"train", {{"epochs", 30}, {"batch_size", 16}}}}},
            {"pose",
             {{"model", {{"encoder_depth", 18}, {"width_multiplier", 0.125}, {"input_hw", hw}}},
              {"train", {{"epochs", 10}, {"batch_size", 32}}}}},
            {"lvef",
             {{"model", {{"blocks", {1, 1, 1, 1}}, {"width_multiplier", 0.125}, {"clip_length", 8}, {"input_hw", hw}}},
              {"train", {{"epochs", 40}, {"batch_size", 4}}}}},
            {"service", {{"address", "127.0.0.1"}, {"port", 8765}, {"fps", o.sweep_fps}}}};
}

int main(int argc, char** argv) {
    CLI::App app{"Write a synthetic EchoNet-style corpus, sweep manifest and demo run config"};
    std::filesystem::path out;
    synthetic::CorpusOptions options;
    int side = options.frame_size.width;
    app.add_option("out", out, "Output directory")->required();
    app.add_option("--seed", options.seed, "Corpus seed");
    app.add_option("--clips", options.clips, "EchoNet-style clips");
    app.add_option("--frames-per-clip", options.frames_per_clip);
    app.add_option("--subjects", options.subjects, "Sweep subjects");
    app.add_option("--sweeps-per-subject", options.sweeps_per_subject);
    app.add_option("--frames-per-sweep", options.frames_per_sweep);
    app.add_option("--sweep-fps", options.sweep_fps);
    app.add_option("--size", side, "Frame side in pixels (multiple of 32)");
    CLI11_PARSE(app, argc, argv);
    if (side <= 0 || side % 32 != 0) {
        std::cerr << "error: --size must be a positive multiple of 32\n";
        return 2;
    }
    options.frame_size = {side, side};
    try {
        synthetic::write_corpus(out, options);
        std::ofstream(out / "echoguide.json") << demo_config(options).dump(2) << '\n';
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    std::cout << (out / "echoguide.json").string() << '\n';
    return 0;
}
