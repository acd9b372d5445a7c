// Copyright (C) 2026 The EchoGuide Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "echoguide/error.hpp"
#include "echoguide/pose_metrics.hpp"

using namespace echoguide;
using namespace echoguide::pose;

TEST_SUITE("pose.mapping") {

TEST_CASE("score to category") {
    CHECK(score_to_category(0.3) == PoseCategory::green);
    CHECK(score_to_category(0.0) == PoseCategory::green);
    CHECK(score_to_category(-0.0) == PoseCategory::green);
    CHECK(score_to_category(-1.0) == PoseCategory::yellow);
    CHECK(score_to_category(-1.7) == PoseCategory::red);
    CHECK(score_to_category(-1e-12) == PoseCategory::yellow);
    CHECK(score_to_category(PoseScore(5.0)) == PoseCategory::green);
    CHECK(PoseScore(5.0).value() == 1.0);
    CHECK(PoseScore(-9.0).value() == -2.0);
}

TEST_CASE("midpoints map back to their category") {
    for (auto c : kAllCategories) CHECK(score_to_category(category_midpoint(c)) == c);
}

TEST_CASE("category prediction is invariant under monotone rescaling of score and thresholds") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-2.0, 1.0);
    auto f = [](double s) { return std::exp(2.0 * s) + 3.0; };  // strictly increasing
    for (int i = 0; i < 5000; ++i) {
        const double s = u(rng);
        const double t = f(s);
        const PoseCategory rescaled = t >= f(0.0)    ? PoseCategory::green
                                      : t >= f(-1.0) ? PoseCategory::yellow
                                                     : PoseCategory::red;
        CHECK(rescaled == score_to_category(s));
    }
}

}

TEST_SUITE("pose.loss") {

TEST_CASE("inverse-frequency class weights") {
    auto w = compute_class_weights({36238, 28017, 24269});
    const double n = 36238.0 + 28017.0 + 24269.0;
    CHECK(w.green == doctest::Approx(n / (3 * 36238.0)));
    CHECK(w.green == doctest::Approx(0.8143).epsilon(1e-4));
    CHECK(w.yellow == doctest::Approx(1.0532).epsilon(1e-4));
    CHECK(w.red == doctest::Approx(1.2159).epsilon(1e-4));

    auto eq = compute_class_weights({7, 7, 7});
    CHECK(eq.green == 1.0);
    CHECK(eq.yellow == 1.0);
    CHECK(eq.red == 1.0);

    auto small = compute_class_weights({1, 1, 2});
    CHECK(small.green == doctest::Approx(4.0 / 3.0));
    CHECK(small.yellow == doctest::Approx(4.0 / 3.0));
    CHECK(small.red == doctest::Approx(2.0 / 3.0));

    CHECK_THROWS_AS(compute_class_weights({0, 1, 1}), DomainError);
}

TEST_CASE("weighted mse examples") {
    const std::vector<double> p = {0.2, -0.4};
    const std::vector<PoseCategory> c = {PoseCategory::green, PoseCategory::yellow};
    CHECK(weighted_mse(p, p, c, {}) == 0.0);

    const std::vector<double> pred = {0.5};
    const std::vector<double> target = {1.0};
    const std::vector<PoseCategory> green = {PoseCategory::green};
    CHECK(weighted_mse(pred, target, green, {2.0, 1.0, 1.0}) == 0.5);

    const std::vector<double> short_target = {1.0};
    CHECK_THROWS_AS(weighted_mse(p, short_target, c, {}), ShapeError);
}

TEST_CASE("weighted mse matches a scalar loop oracle; unit weights equal plain mse") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(-2.0, 1.0);
    std::uniform_real_distribution<double> wdist(0.1, 3.0);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 1 + rng() % 64;
        std::vector<double> pred(n), target(n);
        std::vector<PoseCategory> cats(n);
        for (std::size_t i = 0; i < n; ++i) {
            pred[i] = u(rng);
            target[i] = u(rng);
            cats[i] = static_cast<PoseCategory>(rng() % 3);
        }
        const ClassWeights w{wdist(rng), wdist(rng), wdist(rng)};
        long double oracle = 0.0L;
        for (std::size_t i = 0; i < n; ++i) {
            const long double wi = cats[i] == PoseCategory::green ? w.green
                                   : cats[i] == PoseCategory::yellow ? w.yellow
                                                                     : w.red;
            oracle += wi * (pred[i] - target[i]) * (pred[i] - target[i]);
        }
        CHECK(weighted_mse(pred, target, cats, w) == doctest::Approx(static_cast<double>(oracle / n)).epsilon(1e-12));

        double mse = 0.0;
        for (std::size_t i = 0; i < n; ++i) mse += (pred[i] - target[i]) * (pred[i] - target[i]);
        CHECK(weighted_mse(pred, target, cats, {}) == mse / static_cast<double>(n));
    }
}

}

TEST_SUITE("pose.evaluation") {

TEST_CASE("perfect predictor") {
    const std::vector<PoseCategory> t = {PoseCategory::green, PoseCategory::red, PoseCategory::yellow,
                                         PoseCategory::green};
    auto r = evaluate_categories(2, t, t);
    CHECK(r.accuracy == 1.0);
    CHECK(r.total() == 4);
    CHECK(r.confusion[index_of(PoseCategory::green)][index_of(PoseCategory::green)] == 2);
    CHECK(r.confusion[index_of(PoseCategory::green)][index_of(PoseCategory::red)] == 0);
}

TEST_CASE("uniform random predictor is near one third on a large balanced set") {
    std::mt19937_64 rng(1);
    std::vector<PoseCategory> truth, pred;
    for (int i = 0; i < 10000; ++i) {
        truth.push_back(static_cast<PoseCategory>(i % 3));
        pred.push_back(static_cast<PoseCategory>(rng() % 3));
    }
    auto r = evaluate_categories(0, truth, pred);
    CHECK(std::abs(r.accuracy - 1.0 / 3.0) <= 0.05);
    std::uint64_t trace = 0;
    for (int c = 0; c < 3; ++c) {
        std::uint64_t row = 0;
        for (int p = 0; p < 3; ++p) row += r.confusion[c][p];
        CHECK(row == std::count(truth.begin(), truth.end(), static_cast<PoseCategory>(c)));
        trace += r.confusion[c][c];
    }
    CHECK(r.accuracy == static_cast<double>(trace) / 10000.0);
}

TEST_CASE("empty test set") {
    std::vector<PoseCategory> none;
    CHECK_THROWS_AS(evaluate_categories(0, none, none), PreconditionError);
}

TEST_CASE("checkpoint selection by trailing mean") {
    const std::vector<double> monotone = {5, 4, 3, 2, 1, 0.5, 0.25};
    auto s = select_checkpoint_epoch(monotone);
    CHECK(s.epoch == 6);
    CHECK_FALSE(s.degraded);

    const std::vector<double> bumpy = {1.0, 1.0, 1.0, 1.0, 1.0, 0.1, 9.0, 9.0, 9.0, 9.0};
    CHECK(select_checkpoint_epoch(bumpy).epoch == 5);

    const std::vector<double> short_run = {3.0, 1.0, 2.0};
    auto d = select_checkpoint_epoch(short_run);
    CHECK(d.degraded);
    CHECK(d.epoch == 1);
}

TEST_CASE("fold and aggregate reports") {
    const std::vector<PoseCategory> t = {PoseCategory::green, PoseCategory::red};
    const std::vector<PoseCategory> p = {PoseCategory::green, PoseCategory::yellow};
    auto j = fold_report_json(evaluate_categories(1, t, p), InputMode::images_only, Architecture::adapter);
    CHECK(j["fold_index"] == 1);
    CHECK(j["mode"] == "images_only");
    CHECK(j["architecture"] == "adapter");
    CHECK(j["accuracy"] == 0.5);
    // rows green, yellow, red
    CHECK(j["confusion"][0][0] == 1);
    CHECK(j["confusion"][2][1] == 1);

    std::vector<nlohmann::json> folds;
    for (int k = 0; k < 5; ++k) {
        auto r = evaluate_categories(k, t, t);
        r.accuracy = 0.5 + 0.1 * k;
        folds.push_back(fold_report_json(r, InputMode::images_and_landmarks, Architecture::regression));
    }
    auto agg = aggregate_report_json(folds);
    CHECK(agg["images_and_landmarks"]["regression"]["mean"].get<double>() == doctest::Approx(0.7));
    CHECK(agg["images_and_landmarks"]["regression"]["folds"].size() == 5);
}

}
