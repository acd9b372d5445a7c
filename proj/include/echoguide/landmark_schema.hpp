// Copyright (C) 2026 The EchoGuide Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace echoguide::landmarks {

using LandmarkId = int;

inline constexpr int kNumContour = 42;
inline constexpr int kNumLandmarks = 47;

// Ids 0..41 follow the tracing row order (row r -> 2r, 2r+1). The first
// tracing row of an EchoNet frame is the long axis, apex first.
inline constexpr LandmarkId kApex = 0;
inline constexpr LandmarkId kMitralValve = 1;
inline constexpr LandmarkId kRV = 42;
inline constexpr LandmarkId kRA = 43;
inline constexpr LandmarkId kLA = 44;
inline constexpr LandmarkId kTV = 45;
inline constexpr LandmarkId kTVA = 46;

/// Landmarks forwarded to the pose scorer, in channel order.
inline constexpr std::array<LandmarkId, 6> kKeySubset = {kApex, kMitralValve, kRV, kTV, kRA, kLA};

/// "contour_00".."contour_41", then RV, RA, LA, TV, TVA.
std::string landmark_name(LandmarkId id);

/// Display label for key landmarks ("LV apex", "MV", ...), else landmark_name.
std::string display_name(LandmarkId id);

/// Resolves the auxiliary landmark tokens RV/RA/LA/TV/TVA and contour names.
std::optional<LandmarkId> parse_landmark_name(std::string_view name);

constexpr bool is_valid_id(LandmarkId id) { return id >= 0 && id < kNumLandmarks; }

constexpr bool is_key_landmark(LandmarkId id) {
    for (auto k : kKeySubset) {
        if (k == id) return true;
    }
    return false;
}

}  // namespace echoguide::landmarks
