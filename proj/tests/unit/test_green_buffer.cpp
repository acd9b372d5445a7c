// Copyright (C) 2026 The EchoGuide Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "echoguide/clip_gate.hpp"
#include "echoguide/green_buffer.hpp"

using namespace echoguide;
using namespace echoguide::pipeline;
using C = PoseCategory;

namespace {

// Closed-form firing count: a run of n greens fires once it reaches
// min(26, ceil(fps)) frames and then every 26 frames.
std::size_t oracle_firings(const std::vector<C>& seq, double fps) {
    const auto first = std::min<std::size_t>(26, static_cast<std::size_t>(std::ceil(fps)));
    std::size_t total = 0;
    std::size_t run = 0;
    auto close_run = [&] {
        if (run >= first) total += 1 + (run - first) / 26;
        run = 0;
    };
    for (auto c : seq) {
        if (c == C::green) {
            ++run;
        } else {
            close_run();
        }
    }
    close_run();
    return total;
}

}  // namespace

TEST_SUITE("lvef.gate") {

TEST_CASE("gate examples") {
    CHECK(lvef::gate_clip(26, 50.0));
    CHECK(lvef::gate_clip(20, 20.0));
    CHECK_FALSE(lvef::gate_clip(20, 30.0));
    CHECK_FALSE(lvef::gate_clip(0, 30.0));
}

TEST_CASE("gate truth table") {
    for (std::size_t n = 1; n <= 60; ++n) {
        for (double fps : {15.0, 20.0, 25.0, 30.0, 50.0}) {
            CHECK(lvef::gate_clip(n, fps) == (n >= 26 || static_cast<double>(n) / fps >= 1.0));
        }
    }
}

}

TEST_SUITE("pipeline.green_buffer") {

TEST_CASE("fires on the 26th green") {
    GreenBuffer buf(30.0);
    for (int i = 0; i < 25; ++i) CHECK_FALSE(buf.update(C::green));
    CHECK(buf.update(C::green));
    CHECK(buf.emitted_count() == 1);
}

TEST_CASE("52 greens fire twice") {
    GreenBuffer buf(30.0);
    int fired = 0;
    for (int i = 0; i < 52; ++i) fired += buf.update(C::green);
    CHECK(fired == 2);
}

TEST_CASE("a red frame resets the run") {
    GreenBuffer buf(30.0);
    std::vector<C> seq(10, C::green);
    seq.push_back(C::red);
    seq.insert(seq.end(), 26, C::green);
    std::vector<std::size_t> fire_at;
    for (std::size_t i = 0; i < seq.size(); ++i) {
        if (buf.update(seq[i])) fire_at.push_back(i);
    }
    REQUIRE(fire_at.size() == 1);
    CHECK(fire_at[0] == seq.size() - 1);
}

TEST_CASE("yellow after ten greens clears the buffer") {
    GreenBuffer buf(30.0);
    cv::Mat f(4, 4, CV_8UC1, cv::Scalar(1));
    for (std::size_t i = 0; i < 10; ++i) buf.update(C::green, f, i);
    CHECK(buf.frames().size() == 10);
    CHECK_FALSE(buf.update(C::yellow, f, 10));
    CHECK(buf.run_length() == 0);
    CHECK(buf.frames().empty());
}

TEST_CASE("low frame rates fire on the one-second rule") {
    GreenBuffer buf(15.0);
    for (int i = 0; i < 14; ++i) CHECK_FALSE(buf.update(C::green));
    CHECK(buf.update(C::green));
}

TEST_CASE("retained frames are bounded and indexed") {
    GreenBuffer buf(30.0, 32);
    cv::Mat f(2, 2, CV_8UC1);
    for (std::size_t i = 100; i < 140; ++i) buf.update(C::green, f, i);
    CHECK(buf.frames().size() == 32);
    CHECK(buf.first_index() == 108);
    CHECK(buf.last_index() == 139);
}

TEST_CASE("firing count matches the closed-form oracle") {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 300; ++trial) {
        const double fps = std::vector<double>{15, 20, 25, 30, 50}[rng() % 5];
        std::vector<C> seq(1 + rng() % 400);
        const int p_green = 80 + static_cast<int>(rng() % 20);
        for (auto& c : seq) {
            const int r = static_cast<int>(rng() % 100);
            c = r < p_green ? C::green : (r % 2 ? C::yellow : C::red);
        }
        GreenBuffer buf(fps);
        std::size_t fired = 0;
        for (auto c : seq) fired += buf.update(c);
        CHECK(fired == oracle_firings(seq, fps));
        CHECK(buf.emitted_count() == fired);
    }
}

}

TEST_SUITE("pipeline.throughput") {

TEST_CASE("throughput arithmetic") {
    auto s = make_throughput(140, 10.0);
    CHECK(s.fps == doctest::Approx(14.0));
    auto zero = make_throughput(5, 0.0);
    CHECK(zero.elapsed_seconds > 0.0);
    CHECK(std::isfinite(zero.fps));
    CHECK(make_throughput(280, 20.0).fps == doctest::Approx(s.fps));
}

}
