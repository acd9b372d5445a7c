// Copyright (C) 2026 The EchoGuide Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>

namespace echoguide::lvef {

inline constexpr std::size_t kMinGateFrames = 26;

/// A clip qualifies for LVEF estimation with at least 26 frames or at least
/// one second of video.
constexpr bool gate_clip(std::size_t frame_count, double fps) {
    if (frame_count >= kMinGateFrames) return true;
    return fps > 0.0 && static_cast<double>(frame_count) / fps >= 1.0;
}

}  // namespace echoguide::lvef
