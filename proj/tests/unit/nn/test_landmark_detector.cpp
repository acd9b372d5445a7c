// Copyright (C) 2026 The EchoGuide Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>

#include "../test_util.hpp"
#include "torch_doctest.hpp"
#include "echoguide/error.hpp"
#include "echoguide/nn/landmark_detector.hpp"
#include "echoguide/nn/tensor_util.hpp"
#include "echoguide/synthetic.hpp"
#include "heatmap_oracles.hpp"

#include <opencv2/imgproc.hpp>

using namespace echoguide;
using namespace echoguide::landmarks;

namespace {

LandmarkModelConfig tiny_config(int hw = 64) {
    LandmarkModelConfig c;
    c.encoder_depth = 18;
    c.width_multiplier = 0.125;
    c.input_height = c.input_width = hw;
    return c;
}

AnnotationBatch single(std::int64_t target, bool mask, double w) {
    return {torch::tensor({{target}}, torch::kInt64), torch::tensor({{mask}}), torch::tensor({w}, torch::kFloat32)};
}

}  // namespace

TEST_SUITE("landmark.loss") {

TEST_CASE("uniform logits give ln(HW)") {
    auto logits = torch::zeros({1, 1, 4, 4});
    CHECK(masked_weighted_nll(logits, single(5, true, 1.0)).item<double>() == doctest::Approx(std::log(16.0)));
}

TEST_CASE("all-false mask gives zero") {
    auto logits = torch::randn({1, 1, 4, 4});
    CHECK(masked_weighted_nll(logits, single(5, false, 1.0)).item<double>() == 0.0);
}

TEST_CASE("matches the naive loop") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 40; ++i) {
        auto in = oracle::random_instance(rng, 4, 5, 16);
        const double got = masked_weighted_nll(in.logits_tensor(), in.batch()).item<double>();
        CHECK(got == doctest::Approx(oracle::naive_nll(in)).epsilon(1e-12));
    }
}

TEST_CASE("analytic gradient matches autograd and finite differences") {
    std::mt19937_64 rng(3);
    auto in = oracle::random_instance(rng, 2, 3, 8, 1.0);
    auto logits = in.logits_tensor().requires_grad_(true);
    masked_weighted_nll(logits, in.batch()).backward();
    auto analytic = masked_weighted_nll_grad(logits, in.batch());
    CHECK(torch::allclose(analytic, logits.grad(), 1e-10, 1e-12));

    auto flat = analytic.reshape({-1}).contiguous();
    std::vector<double> a(flat.data_ptr<double>(), flat.data_ptr<double>() + flat.numel());
    CHECK(oracle::max_relative_error(a, oracle::finite_difference_grad(in, 1e-3), 1e-6) < 1e-4);
}

TEST_CASE("loss is linear in the sample weight") {
    std::mt19937_64 rng(5);
    auto in = oracle::random_instance(rng, 3, 4, 6);
    in.b = 3;
    auto base = oracle::naive_nll(in);
    auto doubled = in;
    doubled.vis_w[1] *= 2.0;
    auto zero = in;
    zero.vis_w[1] = 0.0;
    const double contribution = base - oracle::naive_nll(zero);
    CHECK(masked_weighted_nll(doubled.logits_tensor(), doubled.batch()).item<double>() ==
          doctest::Approx(base + contribution).epsilon(1e-12));
}

TEST_CASE("unmasking a landmark removes exactly its term") {
    std::mt19937_64 rng(8);
    auto in = oracle::random_instance(rng, 2, 3, 5);
    in.mask.assign(in.mask.size(), true);
    const double full = masked_weighted_nll(in.logits_tensor(), in.batch()).item<double>();
    auto dropped = in;
    dropped.mask[0] = false;
    const double less = masked_weighted_nll(dropped.logits_tensor(), dropped.batch()).item<double>();
    auto only = in;
    only.mask.assign(in.mask.size(), false);
    only.mask[0] = true;
    CHECK(full - less == doctest::Approx(oracle::naive_nll(only)).epsilon(1e-10));
}

TEST_CASE("errors") {
    auto logits = torch::zeros({1, 1, 4, 4});
    CHECK_THROWS_AS(masked_weighted_nll(torch::zeros({2, 1, 4, 4}), single(0, true, 1)), ShapeError);
    CHECK_THROWS_AS(masked_weighted_nll(logits, single(16, true, 1)), DomainError);
    logits[0][0][1][1] = std::nan("");
    CHECK_THROWS_AS(masked_weighted_nll(logits, single(0, true, 1)), NumericError);
}

}

TEST_SUITE("landmark.softmax") {

TEST_CASE("channels are normalized and match exp/sum") {
    std::mt19937_64 rng(21);
    auto logits = torch::randn({2, 3, 5, 7}, torch::kFloat64) * 2.0;
    auto probs = spatial_softmax(logits);
    CHECK(torch::allclose(probs.sum({2, 3}), torch::ones({2, 3}, torch::kFloat64), 0.0, 1e-5));
    auto ch = logits[1][2].reshape({-1}).contiguous();
    auto want = oracle::naive_softmax(std::vector<double>(ch.data_ptr<double>(), ch.data_ptr<double>() + ch.numel()));
    auto got = probs[1][2].reshape({-1}).contiguous();
    for (std::size_t i = 0; i < want.size(); ++i) CHECK(got[static_cast<long>(i)].item<double>() == doctest::Approx(want[i]).epsilon(1e-9));
}

TEST_CASE("saturated logit") {
    auto logits = torch::zeros({1, 1, 8, 8});
    logits[0][0][3][6] = 50.0;
    auto p = spatial_softmax(logits);
    CHECK(p[0][0][3][6].item<float>() > 0.999f);
}

TEST_CASE("shift invariance") {
    auto logits = torch::randn({1, 2, 6, 6});
    auto shifted = logits + torch::tensor({3.0f, -7.0f}).reshape({1, 2, 1, 1});
    CHECK(torch::allclose(spatial_softmax(logits), spatial_softmax(shifted), 0.0, 1e-6));
}

TEST_CASE("decoding a delta") {
    auto probs = torch::zeros({1, 64, 64});
    probs[0][40][30] = 1.0f;
    auto preds = decode_landmarks(probs, {.tau = 1.0 / 4096}, VisibilityGate::for_frame(64, 64));
    CHECK(preds[0].x == 30);
    CHECK(preds[0].y == 40);
    CHECK(preds[0].radius == doctest::Approx(std::sqrt(1.0 / M_PI)));
    CHECK(preds[0].visible);
}

}

TEST_SUITE("landmark.model") {

TEST_CASE("output shape follows the input") {
    nn::set_deterministic(0);
    LandmarkNet net(tiny_config());
    net->eval();
    torch::NoGradGuard ng;
    CHECK(net->forward(torch::zeros({2, 1, 64, 64})).sizes() == torch::IntArrayRef{2, 47, 64, 64});
    CHECK(net->forward(torch::zeros({1, 3, 96, 96})).sizes() == torch::IntArrayRef{1, 47, 96, 96});
    CHECK(net->forward(torch::zeros({1, 1, 112, 112})).sizes() == torch::IntArrayRef{1, 47, 112, 112});
    CHECK(net->forward(torch::zeros({1, 1, 100, 72})).sizes() == torch::IntArrayRef{1, 47, 100, 72});
    CHECK_THROWS_AS(net->forward(torch::zeros({1, 100, 100})), ShapeError);
}

TEST_CASE("padding does not leak into the cropped logits") {
    nn::set_deterministic(0);
    LandmarkNet net(tiny_config());
    net->eval();
    torch::NoGradGuard ng;
    auto x = torch::randn({1, 1, 64, 64});
    auto padded = torch::zeros({1, 1, 64, 64});
    padded.slice(2, 0, 50).slice(3, 0, 40).copy_(x.slice(2, 0, 50).slice(3, 0, 40));
    auto a = net->forward(x.slice(2, 0, 50).slice(3, 0, 40).contiguous());
    auto b = net->forward(padded).slice(2, 0, 50).slice(3, 0, 40);
    CHECK(torch::allclose(a, b, 1e-5, 1e-5));
}

TEST_CASE("default config builds the full-size decoder") {
    LandmarkNet net(LandmarkModelConfig{});
    std::vector<std::int64_t> channels;
    for (const auto& m : net->decoder->children()) {
        if (auto* bn = m->as<torch::nn::BatchNorm2d>()) channels.push_back(bn->options.num_features());
    }
    CHECK(channels == std::vector<std::int64_t>{512, 256, 128, 64, 64});
    CHECK(net->head->options.out_channels() == 47);
}

TEST_CASE("checkpoint round trip keeps config and outputs") {
    testing::TempDir dir;
    nn::set_deterministic(1);
    auto cfg = tiny_config();
    cfg.gate.r_vis = 9.0;
    LandmarkDetector det(cfg);
    det.save(dir.path() / "ckpt", nlohmann::json{{"note", 1}});

    auto j = nn::read_json(dir.path() / "ckpt" / "config.json");
    for (const char* key : {"schema_version", "encoder_depth", "width_multiplier", "input_hw", "num_landmarks",
                            "vis_weight_map", "tau", "r_vis", "p_vis"}) {
        CHECK(j.contains(key));
    }
    CHECK(j.size() == 9);
    CHECK(j["tau"].get<double>() == doctest::Approx(1.0 / 4096));

    auto loaded = LandmarkDetector::load(dir.path() / "ckpt");
    CHECK(loaded.config().gate.r_vis == 9.0);
    cv::Mat frame(64, 64, CV_8UC1, cv::Scalar(80));
    cv::circle(frame, {20, 30}, 6, cv::Scalar(220), -1);
    auto a = det.predict(frame);
    auto b = loaded.predict(frame);
    REQUIRE(a.size() == 47);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].x == b[i].x);
        CHECK(a[i].y == b[i].y);
        CHECK(a[i].peak == doctest::Approx(b[i].peak));
    }
    CHECK_THROWS_AS(det.predict(cv::Mat(32, 32, CV_8UC1)), ShapeError);
}

TEST_CASE("annotation batch encodes scaled targets") {
    ingest::LandmarkAnnotation ann;
    ann.points[kApex] = {10.0, 20.0, 1, true};
    ann.points[kRV] = {5.0, 5.0, 3, true};
    ann.points[kLA] = {0.0, 0.0, 1, false};
    auto batch = make_annotation_batch(std::span(&ann, 1), 32, 32, {});
    CHECK(batch.targets[0][kApex].item<std::int64_t>() == 20 * 32 + 10);
    CHECK(batch.mask[0][kRV].item<bool>());
    CHECK_FALSE(batch.mask[0][kLA].item<bool>());
    CHECK_FALSE(batch.mask[0][kTV].item<bool>());
    CHECK(batch.vis_w[0].item<float>() == doctest::Approx((1.0 + 0.25) / 2));

    auto up = rescale_annotation(ann, {32, 32}, {64, 64});
    CHECK(up.points[kApex].x == doctest::Approx(20.5));
}

}

TEST_SUITE("landmark.training") {

TEST_CASE("short overfit decreases loss and is reproducible") {
    std::mt19937_64 rng(4);
    std::vector<LandmarkSample> samples;
    for (int i = 0; i < 4; ++i) {
        auto f = synthetic::make_landmark_frame(rng, {64, 64});
        samples.push_back({f.image, f.annotation});
    }
    LandmarkTrainConfig tc;
    tc.epochs = 12;
    tc.batch_size = 4;
    tc.augment = false;
    tc.shuffle = false;
    tc.seed = 9;

    auto run = [&] {
        nn::set_deterministic(tc.seed);
        LandmarkDetector det(tiny_config());
        auto r = train_landmark_detector(det, samples, samples, tc);
        return std::pair{r, landmark_loss(det, samples)};
    };
    auto [first, val_a] = run();
    REQUIRE(first.step_losses.size() == 12);
    for (std::size_t i = 1; i < 10; ++i) CHECK(first.step_losses[i] < first.step_losses[i - 1]);
    CHECK(first.epochs.back().val_loss.has_value());
    auto [second, val_b] = run();
    CHECK(val_a == doctest::Approx(val_b).epsilon(1e-6));
}

TEST_CASE("empty training set is rejected") {
    LandmarkDetector det(tiny_config());
    CHECK_THROWS_AS(train_landmark_detector(det, {}, {}, {}), PreconditionError);
}

}
