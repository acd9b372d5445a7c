// Copyright (C) 2026 The EchoGuide Authors
// SPDX-License-Identifier: Apache-2.0

#include <csignal>
#include <iostream>

#include <CLI11.hpp>
#include <boost/asio/io_context.hpp>
#include <boost/asio/signal_set.hpp>
#include <opencv2/imgcodecs.hpp>

#include "echoguide/clip_gate.hpp"
#include "echoguide/error.hpp"
#include "echoguide/nn/pose_cross_validation.hpp"
#include "echoguide/nn/tensor_util.hpp"
#include "echoguide/service/server.hpp"
#include "echoguide/video_io.hpp"
#include "run_config.hpp"

using namespace echoguide;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Common {
    fs::path config;
    fs::path checkpoint;
    std::optional<std::uint64_t> seed;
    std::string mode;
};

tools::RunConfig resolve(const Common& c) {
    auto rc = tools::load_run_config(c.config);
    if (!c.checkpoint.empty()) rc.checkpoint_dir = c.checkpoint;
    if (c.seed) rc.seed = rc.landmark_train.seed = rc.pose_train.seed = rc.lvef_train.seed = *c.seed;
    if (!c.mode.empty()) {
        auto m = pose::parse_mode(c.mode);
        if (!m) throw ParseError("unknown mode " + c.mode);
        rc.pose_model.mode = *m;
    }
    return rc;
}

json stats_json(const landmarks::ErrorStats& s) { return {{"mean", s.mean}, {"std", s.stddev}, {"count", s.count}}; }

json error_report_json(const landmarks::LandmarkErrorReport& r) {
    json per = json::object();
    for (const auto& [id, s] : r.per_landmark) per[landmarks::landmark_name(id)] = stats_json(s);
    return {{"overall", stats_json(r.overall)}, {"key_subset", stats_json(r.key_subset)}, {"per_landmark", per}};
}

int train_landmarks(const Common& c) {
    const auto rc = resolve(c);
    auto dataset = tools::load_echonet(rc);
    const auto train = landmarks::collect_samples(dataset, ingest::Split::train);
    const auto val = landmarks::collect_samples(dataset, ingest::Split::val);
    nn::set_deterministic(rc.seed);
    landmarks::LandmarkDetector detector(rc.landmark_model);
    auto result = landmarks::train_landmark_detector(detector, train, val, rc.landmark_train, [](const auto& log) {
        std::cerr << "epoch " << log.epoch << " steps " << log.steps << " train_loss " << log.train_loss;
        if (log.val_loss) std::cerr << " val_loss " << *log.val_loss;
        std::cerr << '\n';
    });
    const auto out = rc.checkpoints().landmarks;
    detector.save(out, result.to_json());
    std::cout << json{{"checkpoint", out.string()}, {"train_frames", train.size()}, {"val_frames", val.size()}}.dump(2)
              << '\n';
    return 0;
}

std::unique_ptr<landmarks::LandmarkDetector> detector_for(const tools::RunConfig& rc) {
    if (!pose::uses_landmarks(rc.pose_model.mode)) return nullptr;
    return std::make_unique<landmarks::LandmarkDetector>(landmarks::LandmarkDetector::load(rc.checkpoints().landmarks));
}

int train_pose(const Common& c) {
    const auto rc = resolve(c);
    const auto sweeps = tools::load_sweeps(rc);
    auto detector = detector_for(rc);
    std::vector<pose::PoseSample> samples;
    for (const auto& s : sweeps) {
        auto part = pose::sweep_samples(s, detector.get());
        samples.insert(samples.end(), part.begin(), part.end());
    }
    nn::set_deterministic(rc.seed);
    pose::PoseScorer scorer(rc.pose_model);
    auto result = pose::train_pose_scorer(scorer, samples, {}, rc.pose_train, [](const pose::PoseEpochLog& log) {
        std::cerr << "epoch " << log.epoch << " train_loss " << log.train_loss << '\n';
    });
    const auto out = rc.checkpoints().pose;
    scorer.save(out, result.to_json());
    std::cout << json{{"checkpoint", out.string()}, {"frames", samples.size()},
                      {"mode", std::string(to_string(rc.pose_model.mode))}}.dump(2)
              << '\n';
    return 0;
}

int train_lvef(const Common& c) {
    const auto rc = resolve(c);
    auto dataset = tools::load_echonet(rc);
    const auto train = lvef::collect_lvef_samples(dataset, ingest::Split::train);
    const auto val = lvef::collect_lvef_samples(dataset, ingest::Split::val);
    nn::set_deterministic(rc.seed);
    lvef::LvefEstimator estimator(rc.lvef_model);
    auto result = lvef::train_lvef_estimator(estimator, train, val, rc.lvef_train, [](const auto& log) {
        std::cerr << "epoch " << log.epoch << " train_loss " << log.train_loss << '\n';
    });
    const auto out = rc.checkpoints().lvef;
    estimator.save(out, result.to_json());
    json summary = {{"checkpoint", out.string()}, {"train_clips", train.size()}, {"train_mae", lvef::lvef_mae(estimator, train)}};
    if (!val.empty()) summary["val_mae"] = lvef::lvef_mae(estimator, val);
    std::cout << summary.dump(2) << '\n';
    return 0;
}

int eval_landmarks(const Common& c, const std::string& split) {
    const auto rc = resolve(c);
    auto dataset = tools::load_echonet(rc);
    std::optional<ingest::Split> which;
    for (auto s : {ingest::Split::train, ingest::Split::val, ingest::Split::test}) {
        if (to_string(s) == split) which = s;
    }
    if (!which && split != "all") throw ParseError("unknown split " + split);
    auto detector = landmarks::LandmarkDetector::load(rc.checkpoints().landmarks);
    const auto samples = landmarks::collect_samples(dataset, which);
    auto report = error_report_json(landmarks::evaluate_detector(detector, samples));
    report["split"] = split;
    report["frames"] = samples.size();
    std::cout << report.dump(2) << '\n';
    return 0;
}

int eval_pose(const Common& c, const fs::path& out_dir) {
    const auto rc = resolve(c);
    const auto sweeps = tools::load_sweeps(rc);
    auto detector = detector_for(rc);
    pose::CrossValidationConfig cv;
    cv.model = rc.pose_model;
    cv.train = rc.pose_train;
    cv.fold_seed = rc.fold_seed;
    cv.output_dir = out_dir.empty() ? rc.checkpoint_dir / ("cv_" + std::string(to_string(rc.pose_model.mode)) + "_" +
                                                           std::string(to_string(rc.pose_model.architecture)))
                                    : out_dir;
    auto result = pose::cross_validate_pose(sweeps, detector.get(), cv, [](const pose::FoldRun& run) {
        std::cerr << "fold " << run.result.fold_index << " accuracy " << run.result.accuracy << '\n';
    });
    std::cout << result.aggregate.dump(2) << '\n';
    return 0;
}

pipeline::Session open_session(const tools::RunConfig& rc, const std::string& id, double fps) {
    pipeline::SessionOptions options;
    options.session_id = id;
    options.fps = fps;
    options.buffer_capacity = rc.service.buffer_capacity;
    options.resize_frames = true;
    return pipeline::Session(pipeline::CascadeModels::load(rc.checkpoints()), options);
}

int score_sweep(const Common& c, const fs::path& path, const std::string& sweep_id) {
    const auto rc = resolve(c);
    std::vector<cv::Mat> frames;
    std::vector<PoseCategory> truth;
    double fps = rc.service.fps;
    std::string id = path.stem().string();
    if (path.extension() == ".json") {
        auto sweeps = ingest::parse_sweep_manifest(path);
        auto it = std::find_if(sweeps.begin(), sweeps.end(),
                               [&](const auto& s) { return sweep_id.empty() || s.sweep_id == sweep_id; });
        if (it == sweeps.end()) throw ParseError("no matching sweep in " + path.string());
        frames = std::move(it->frames);
        truth = it->frame_categories;
        fps = it->fps;
        id = it->sweep_id;
    } else {
        frames = video::read_frames(path);
        if (double probed = video::probe_fps(path); probed > 0.0) fps = probed;
    }
    auto session = open_session(rc, id, fps);
    std::vector<PoseCategory> predicted;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        auto r = session.process_frame(frames[i], i);
        auto j = pipeline::result_to_json(r);
        if (i < truth.size()) j["truth_category"] = std::string(to_string(truth[i]));
        predicted.push_back(r.category);
        std::cout << j.dump() << '\n';
    }
    if (!truth.empty()) {
        auto fold = pose::evaluate_categories(0, truth, predicted);
        std::cerr << "accuracy " << fold.accuracy << " over " << fold.total() << " frames\n";
    }
    return 0;
}

int infer(const Common& c, const fs::path& path, double fps_override) {
    const auto rc = resolve(c);
    std::vector<cv::Mat> frames;
    double fps = rc.service.fps;
    const auto ext = path.extension().string();
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp") {
        auto img = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
        if (img.empty()) throw ParseError("cannot read image " + path.string());
        frames.push_back(img);
    } else {
        frames = video::read_frames(path);
        if (double probed = video::probe_fps(path); probed > 0.0) fps = probed;
    }
    if (fps_override > 0.0) fps = fps_override;
    auto models = pipeline::CascadeModels::load(rc.checkpoints());
    auto session = pipeline::Session(models, {path.stem().string(), fps, rc.service.buffer_capacity, true});
    json results = json::array();
    for (std::size_t i = 0; i < frames.size(); ++i) results.push_back(pipeline::result_to_json(session.process_frame(frames[i], i)));
    json out = {{"input", path.string()}, {"fps", fps}, {"frames", std::move(results)}, {"lvef", nullptr}};
    if (lvef::gate_clip(frames.size(), fps)) {
        out["lvef"] = lvef::lvef_report_json(models.estimator->estimate(frames, fps, path.stem().string()));
    }
    std::cout << out.dump(2) << '\n';
    return 0;
}

int serve(const Common& c, int port) {
    const auto rc = resolve(c);
    service::ServiceConfig config;
    config.models = service::checkpoint_factory(rc.checkpoints());
    config.fps = rc.service.fps;
    config.buffer_capacity = rc.service.buffer_capacity;
    config.queue_all = rc.service.queue_all;
    config.resize_frames = rc.service.resize_frames;
    config.log_dir = rc.service.log_dir;
    // Fail fast on missing checkpoints instead of on the first frame.
    config.models();

    service::StreamServer server(config);
    const auto bound = server.start(rc.service.address, static_cast<unsigned short>(port >= 0 ? port : rc.service.port));
    std::cerr << "listening on ws://" << rc.service.address << ":" << bound << '\n';
    boost::asio::io_context signals_ctx;
    boost::asio::signal_set signals(signals_ctx, SIGINT, SIGTERM);
    signals.async_wait([](const boost::system::error_code&, int) {});
    signals_ctx.run();
    std::cerr << "shutting down\n";
    server.stop();
    return 0;
}

int folds(const Common& c) {
    const auto rc = resolve(c);
    ingest::SweepParseOptions options;
    options.load_video = false;
    if (!rc.sweeps) throw PreconditionError("run config has no sweeps manifest");
    std::set<std::string> subjects;
    for (const auto& s : ingest::parse_sweep_manifest(*rc.sweeps, options)) subjects.insert(s.subject_id);
    const std::vector<std::string> ids(subjects.begin(), subjects.end());
    json out = json::array();
    for (const auto& f : ingest::make_subject_folds(ids, rc.fold_seed)) {
        out.push_back({{"fold_index", f.fold_index}, {"test", f.test_subjects}, {"val", f.val_subjects},
                       {"train", f.train_subjects}});
    }
    std::cout << out.dump(2) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"A4CH guidance cascade: training, evaluation, inference and streaming"};
    app.require_subcommand(1);
    Common common;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", common.config, "Run configuration (JSON)")->check(CLI::ExistingFile);
        sub->add_option("--checkpoint", common.checkpoint, "Checkpoint root with landmarks/, pose/ and lvef/");
        sub->add_option("--seed", common.seed, "Seed for initialisation, shuffling and augmentation");
        sub->add_option("--mode", common.mode, "Pose input mode")
            ->check(CLI::IsMember({"images_only", "landmarks_only", "images_and_landmarks"}));
        return sub;
    };

    auto* tl = add_common(app.add_subcommand("train-landmarks", "Train the landmark detector"));
    auto* tp = add_common(app.add_subcommand("train-pose", "Train a pose scorer on every labelled sweep"));
    auto* tv = add_common(app.add_subcommand("train-lvef", "Train the LVEF estimator"));
    std::string split = "test";
    auto* el = add_common(app.add_subcommand("eval-landmarks", "Landmark error on an EchoNet split"));
    el->add_option("--split", split, "train, val, test or all");
    fs::path cv_out;
    auto* ep = add_common(app.add_subcommand("eval-pose", "Subject-level 5-fold cross-validation"));
    ep->add_option("--out", cv_out, "Directory for fold checkpoints and reports");
    fs::path input;
    std::string sweep_id;
    auto* ss = add_common(app.add_subcommand("score-sweep", "Run the cascade over a recorded sweep"));
    ss->add_option("sweep", input, "Sweep manifest (.json), video or frame directory")->required();
    ss->add_option("--sweep-id", sweep_id, "Sweep within the manifest (default: first)");
    double fps = 0.0;
    auto* in = add_common(app.add_subcommand("infer", "Run the cascade on an image or video"));
    in->add_option("input", input, "Image, video or frame directory")->required();
    in->add_option("--fps", fps, "Frame rate when the container has none");
    int port = -1;
    auto* sv = add_common(app.add_subcommand("serve", "Start the WebSocket guidance service"));
    sv->add_option("--port", port, "Listening port (0 picks a free one)");
    auto* fo = add_common(app.add_subcommand("folds", "Print the subject-level fold plan"));

    CLI11_PARSE(app, argc, argv);
    try {
        if (tl->parsed()) return train_landmarks(common);
        if (tp->parsed()) return train_pose(common);
        if (tv->parsed()) return train_lvef(common);
        if (el->parsed()) return eval_landmarks(common, split);
        if (ep->parsed()) return eval_pose(common, cv_out);
        if (ss->parsed()) return score_sweep(common, input, sweep_id);
        if (in->parsed()) return infer(common, input, fps);
        if (sv->parsed()) return serve(common, port);
        if (fo->parsed()) return folds(common);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
