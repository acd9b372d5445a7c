// Copyright (C) 2026 The EchoGuide Authors
// SPDX-License-Identifier: Apache-2.0

#include <vector>

#include "doctest.h"
#include "echoguide/error.hpp"
#include "echoguide/rubric.hpp"

using namespace echoguide;
using rubric::Criterion;

TEST_SUITE("rubric") {

TEST_CASE("deductions of the rubric table") {
    const std::vector<Criterion> lv_rv = {Criterion::LV_FREE_WALL_NOT_VISIBLE, Criterion::RV_FREE_WALL_NOT_VISIBLE};
    CHECK(rubric::total_deduction(lv_rv) == 1.5);
    CHECK(rubric::total_deduction(std::vector<Criterion>{}) == 0.0);

    std::vector<Criterion> all;
    for (auto c : rubric::kAllCriteria) {
        if (c != Criterion::LA_PARTIALLY_OUT) all.push_back(c);
    }
    // 1 + 0.5 + 2 + 0.5 + 1 + 0.5
    CHECK(rubric::total_deduction(all) == 5.5);
}

TEST_CASE("LA criteria are mutually exclusive") {
    const std::vector<Criterion> both = {Criterion::LA_ENTIRELY_OUT, Criterion::LA_PARTIALLY_OUT};
    CHECK_THROWS_AS(rubric::total_deduction(both), DomainError);
}

TEST_CASE("duplicate criteria are rejected") {
    const std::vector<Criterion> dup = {Criterion::RA_NOT_VISIBLE, Criterion::RA_NOT_VISIBLE};
    CHECK_THROWS_AS(rubric::total_deduction(dup), DomainError);
}

TEST_CASE("categorize thresholds") {
    CHECK(rubric::categorize(2.0) == PoseCategory::red);
    CHECK(rubric::categorize(0.0) == PoseCategory::green);
    CHECK(rubric::categorize(1.5) == PoseCategory::yellow);
    CHECK(rubric::categorize(1.0) == PoseCategory::yellow);
    CHECK(rubric::categorize(0.999) == PoseCategory::green);
    CHECK(rubric::categorize(1.999) == PoseCategory::yellow);
    CHECK_THROWS_AS(rubric::categorize(-0.5), DomainError);
}

TEST_CASE("categorize is monotone non-increasing") {
    PoseCategory prev = PoseCategory::green;
    for (int q = 0; q <= 44; ++q) {
        const auto c = rubric::categorize(q * 0.125);
        CHECK(c <= prev);
        prev = c;
    }
}

TEST_CASE("criterion names round-trip") {
    for (auto c : rubric::kAllCriteria) {
        auto parsed = rubric::parse_criterion(rubric::to_string(c));
        REQUIRE(parsed);
        CHECK(*parsed == c);
    }
    CHECK_FALSE(rubric::parse_criterion("LV_MISSING"));
    CHECK(parse_category("Yellow") == PoseCategory::yellow);
    CHECK_FALSE(parse_category("blue"));
}

}
