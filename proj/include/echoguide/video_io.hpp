// Copyright (C) 2026 The EchoGuide Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <opencv2/core.hpp>

namespace echoguide::video {

/// Decodes a video file, or a directory of PNG frames (sorted by name), into
/// 8-bit grayscale frames.
std::vector<cv::Mat> read_frames(const std::filesystem::path& path);

/// Frame rate stored in the container, or 0 when unknown (frame directories).
double probe_fps(const std::filesystem::path& path);

/// Writes frames losslessly: FFV1 in AVI for ".avi", otherwise a directory of
/// numbered PNG files.
void write_frames(const std::filesystem::path& path, std::span<const cv::Mat> frames, double fps);

/// Converts any 1/3/4-channel 8-bit image to single-channel grayscale.
cv::Mat to_gray(const cv::Mat& image);

std::vector<std::uint8_t> encode_png(const cv::Mat& gray);
/// Throws ParseError when the bytes are not a decodable image.
cv::Mat decode_png(std::span<const std::uint8_t> bytes);

std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Throws ParseError on invalid base64 text.
std::vector<std::uint8_t> base64_decode(std::string_view text);

}  // namespace echoguide::video
