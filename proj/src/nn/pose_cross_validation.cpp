// Copyright (C) 2026 The EchoGuide Authors
// SPDX-License-Identifier: Apache-2.0

#include "echoguide/nn/pose_cross_validation.hpp"

#include <set>

#include "echoguide/error.hpp"
#include "echoguide/nn/tensor_util.hpp"

namespace echoguide::pose {

using nlohmann::json;

std::vector<PoseSample> sweep_samples(const ingest::SweepRecording& sweep, landmarks::LandmarkDetector* detector) {
    if (sweep.frames.size() != sweep.frame_categories.size()) {
        throw ConsistencyError("sweep " + sweep.sweep_id + " has " + std::to_string(sweep.frames.size()) +
                               " frames but " + std::to_string(sweep.frame_categories.size()) + " labels");
    }
    const auto scores = ingest::assign_continuous_scores(sweep);
    std::vector<PoseSample> out;
    out.reserve(sweep.frames.size());
    for (std::size_t i = 0; i < sweep.frames.size(); ++i) {
        PoseSample s;
        s.frame = sweep.frames[i];
        s.category = sweep.frame_categories[i];
        s.score = scores[i];
        if (detector) s.landmarks = detector->predict_rescaled(s.frame);
        out.push_back(std::move(s));
    }
    return out;
}

CrossValidationResult cross_validate_pose(std::span<const ingest::SweepRecording> sweeps,
                                          landmarks::LandmarkDetector* detector,
                                          const CrossValidationConfig& config,
                                          const std::function<void(const FoldRun&)>& on_fold) {
    if (uses_landmarks(config.model.mode) && !detector) {
        throw PreconditionError("mode " + std::string(to_string(config.model.mode)) + " needs a landmark detector");
    }
    std::set<std::string> subject_set;
    for (const auto& s : sweeps) subject_set.insert(s.subject_id);
    const std::vector<std::string> subjects(subject_set.begin(), subject_set.end());
    const auto plans = ingest::make_subject_folds(subjects, config.fold_seed);

    std::vector<std::pair<std::string, std::vector<PoseSample>>> per_sweep;
    for (const auto& s : sweeps) {
        per_sweep.emplace_back(s.subject_id, sweep_samples(s, uses_landmarks(config.model.mode) ? detector : nullptr));
    }
    auto gather = [&](const std::set<std::string>& group) {
        std::vector<PoseSample> out;
        for (const auto& [subject, samples] : per_sweep) {
            if (group.count(subject)) out.insert(out.end(), samples.begin(), samples.end());
        }
        return out;
    };

    CrossValidationResult result;
    std::vector<json> reports;
    for (const auto& plan : plans) {
        const auto train = gather(plan.train_subjects);
        const auto val = gather(plan.val_subjects);
        const auto test = gather(plan.test_subjects);

        nn::set_deterministic(config.train.seed + static_cast<std::uint64_t>(plan.fold_index));
        PoseScorer scorer(config.model);
        FoldRun run;
        run.training = train_pose_scorer(scorer, train, val, config.train);
        run.result = evaluate_pose_fold(scorer, test, plan.fold_index);
        run.report = fold_report_json(run.result, config.model.mode, config.model.architecture);
        run.report["test_subjects"] = plan.test_subjects;
        run.report["val_subjects"] = plan.val_subjects;
        run.train_frames = train.size();
        run.val_frames = val.size();
        if (config.output_dir) {
            const auto dir = *config.output_dir / ("fold_" + std::to_string(plan.fold_index));
            scorer.save(dir, run.training.to_json());
            nn::write_json(dir / "report.json", run.report);
        }
        if (on_fold) on_fold(run);
        reports.push_back(run.report);
        result.folds.push_back(std::move(run));
    }
    result.aggregate = aggregate_report_json(reports);
    if (config.output_dir) nn::write_json(*config.output_dir / "aggregate.json", result.aggregate);
    return result;
}

}  // namespace echoguide::pose
