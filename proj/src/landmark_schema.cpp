// Copyright (C) 2026 The EchoGuide Authors
// SPDX-License-Identifier: Apache-2.0

#include "echoguide/landmark_schema.hpp"

#include <cstdio>

namespace echoguide::landmarks {

namespace {
constexpr std::array<std::string_view, 5> kAuxNames = {"RV", "RA", "LA", "TV", "TVA"};
}

std::string landmark_name(LandmarkId id) {
    if (id >= 0 && id < kNumContour) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "contour_%02d", id);
        return buf;
    }
    if (id >= kNumContour && id < kNumLandmarks) return std::string(kAuxNames[id - kNumContour]);
    return "invalid";
}

std::string display_name(LandmarkId id) {
    if (id == kApex) return "LV apex";
    if (id == kMitralValve) return "MV";
    return landmark_name(id);
}

std::optional<LandmarkId> parse_landmark_name(std::string_view name) {
    for (std::size_t i = 0; i < kAuxNames.size(); ++i) {
        if (kAuxNames[i] == name) return kNumContour + static_cast<LandmarkId>(i);
    }
    for (LandmarkId id = 0; id < kNumContour; ++id) {
        if (landmark_name(id) == name) return id;
    }
    return std::nullopt;
}

}  // namespace echoguide::landmarks
