// Copyright (C) 2026 The EchoGuide Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>

namespace echoguide {

/// Traffic-light pose quality. Underlying values give the total order
/// red < yellow < green and double as array indices.
enum class PoseCategory : std::uint8_t { red = 0, yellow = 1, green = 2 };

inline constexpr std::array<PoseCategory, 3> kAllCategories = {
    PoseCategory::green, PoseCategory::yellow, PoseCategory::red};

constexpr std::size_t index_of(PoseCategory c) { return static_cast<std::size_t>(c); }

std::string_view to_string(PoseCategory c);
/// Accepts "green"/"yellow"/"red" (also the single letters G/Y/R), case-insensitive.
std::optional<PoseCategory> parse_category(std::string_view token);

namespace rubric {

/// Frame-quality criteria of the deduction rubric.
enum class Criterion : std::uint8_t {
    LV_FREE_WALL_NOT_VISIBLE,
    RV_FREE_WALL_NOT_VISIBLE,
    LA_ENTIRELY_OUT,
    LA_PARTIALLY_OUT,
    RA_NOT_VISIBLE,
    AORTA_VISIBLE_5CH,
    OTHER_SIGNAL_DROPOUT,
};

inline constexpr std::array<Criterion, 7> kAllCriteria = {
    Criterion::LV_FREE_WALL_NOT_VISIBLE, Criterion::RV_FREE_WALL_NOT_VISIBLE,
    Criterion::LA_ENTIRELY_OUT,          Criterion::LA_PARTIALLY_OUT,
    Criterion::RA_NOT_VISIBLE,           Criterion::AORTA_VISIBLE_5CH,
    Criterion::OTHER_SIGNAL_DROPOUT};

/// Deduction in points (positive magnitude). All values are exact binary halves.
double deduction(Criterion c);

std::string_view to_string(Criterion c);
std::optional<Criterion> parse_criterion(std::string_view token);

/// Sum of deductions for a frame. Throws DomainError on a repeated criterion
/// or when both LA criteria are present.
double total_deduction(std::span<const Criterion> criteria);

/// red iff >= 2, yellow iff in [1, 2), green iff < 1. Throws DomainError for
/// negative or non-finite input.
PoseCategory categorize(double deduction);

inline PoseCategory categorize(std::span<const Criterion> criteria) {
    return categorize(total_deduction(criteria));
}

}  // namespace rubric
}  // namespace echoguide
