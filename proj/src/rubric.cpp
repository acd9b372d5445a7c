// Copyright (C) 2026 The EchoGuide Authors
// SPDX-License-Identifier: Apache-2.0

#include "echoguide/rubric.hpp"

#include <algorithm>
#include <bitset>
#include <cctype>
#include <cmath>
#include <string>

#include "echoguide/error.hpp"

namespace echoguide {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    return out;
}

}  // namespace

std::string_view to_string(PoseCategory c) {
    switch (c) {
        case PoseCategory::green: return "green";
        case PoseCategory::yellow: return "yellow";
        case PoseCategory::red: return "red";
    }
    return "unknown";
}

std::optional<PoseCategory> parse_category(std::string_view token) {
    const auto t = lower(token);
    if (t == "green" || t == "g") return PoseCategory::green;
    if (t == "yellow" || t == "y") return PoseCategory::yellow;
    if (t == "red" || t == "r") return PoseCategory::red;
    return std::nullopt;
}

namespace rubric {

double deduction(Criterion c) {
    switch (c) {
        case Criterion::LV_FREE_WALL_NOT_VISIBLE: return 1.0;
        case Criterion::RV_FREE_WALL_NOT_VISIBLE: return 0.5;
        case Criterion::LA_ENTIRELY_OUT: return 2.0;
        case Criterion::LA_PARTIALLY_OUT: return 1.0;
        case Criterion::RA_NOT_VISIBLE: return 0.5;
        case Criterion::AORTA_VISIBLE_5CH: return 1.0;
        case Criterion::OTHER_SIGNAL_DROPOUT: return 0.5;
    }
    return 0.0;
}

std::string_view to_string(Criterion c) {
    switch (c) {
        case Criterion::LV_FREE_WALL_NOT_VISIBLE: return "LV_FREE_WALL_NOT_VISIBLE";
        case Criterion::RV_FREE_WALL_NOT_VISIBLE: return "RV_FREE_WALL_NOT_VISIBLE";
        case Criterion::LA_ENTIRELY_OUT: return "LA_ENTIRELY_OUT";
        case Criterion::LA_PARTIALLY_OUT: return "LA_PARTIALLY_OUT";
        case Criterion::RA_NOT_VISIBLE: return "RA_NOT_VISIBLE";
        case Criterion::AORTA_VISIBLE_5CH: return "AORTA_VISIBLE_5CH";
        case Criterion::OTHER_SIGNAL_DROPOUT: return "OTHER_SIGNAL_DROPOUT";
    }
    return "UNKNOWN";
}

std::optional<Criterion> parse_criterion(std::string_view token) {
    for (auto c : kAllCriteria) {
        if (to_string(c) == token) return c;
    }
    return std::nullopt;
}

double total_deduction(std::span<const Criterion> criteria) {
    std::bitset<kAllCriteria.size()> seen;
    double total = 0.0;
    for (auto c : criteria) {
        const auto bit = static_cast<std::size_t>(c);
        if (seen.test(bit)) {
            throw DomainError("criterion listed twice: " + std::string(to_string(c)));
        }
        seen.set(bit);
        total += deduction(c);
    }
    if (seen.test(static_cast<std::size_t>(Criterion::LA_ENTIRELY_OUT)) &&
        seen.test(static_cast<std::size_t>(Criterion::LA_PARTIALLY_OUT))) {
        throw DomainError("LA_ENTIRELY_OUT and LA_PARTIALLY_OUT are mutually exclusive");
    }
    return total;
}

PoseCategory categorize(double deduction) {
    if (!std::isfinite(deduction) || deduction < 0.0) {
        throw DomainError("deduction must be a finite non-negative number");
    }
    if (deduction >= 2.0) return PoseCategory::red;
    if (deduction >= 1.0) return PoseCategory::yellow;
    return PoseCategory::green;
}

}  // namespace rubric
}  // namespace echoguide
