// Copyright (C) 2026 The EchoGuide Authors
// SPDX-License-Identifier: Apache-2.0

#include "echoguide/video_io.hpp"

#include <algorithm>
#include <cstdio>

#include <openssl/evp.h>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <opencv2/videoio.hpp>

#include "echoguide/error.hpp"

namespace echoguide::video {

namespace fs = std::filesystem;

cv::Mat to_gray(const cv::Mat& image) {
    if (image.empty()) return {};
    cv::Mat gray;
    switch (image.channels()) {
        case 1: gray = image.clone(); break;
        case 3: cv::cvtColor(image, gray, cv::COLOR_BGR2GRAY); break;
        case 4: cv::cvtColor(image, gray, cv::COLOR_BGRA2GRAY); break;
        default: throw ShapeError("unsupported channel count " + std::to_string(image.channels()));
    }
    if (gray.depth() != CV_8U) gray.convertTo(gray, CV_8U);
    return gray;
}

std::vector<cv::Mat> read_frames(const fs::path& path) {
    std::vector<cv::Mat> frames;
    if (fs::is_directory(path)) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(path)) {
            if (entry.path().extension() == ".png") files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            cv::Mat img = cv::imread(f.string(), cv::IMREAD_GRAYSCALE);
            if (img.empty()) throw ParseError("cannot decode frame " + f.string());
            frames.push_back(std::move(img));
        }
        return frames;
    }
    if (!fs::exists(path)) throw ParseError("video not found: " + path.string());
    cv::VideoCapture cap(path.string());
    if (!cap.isOpened()) throw ParseError("cannot open video " + path.string());
    cv::Mat frame;
    while (cap.read(frame)) frames.push_back(to_gray(frame));
    return frames;
}

double probe_fps(const fs::path& path) {
    if (fs::is_directory(path)) return 0.0;
    cv::VideoCapture cap(path.string());
    if (!cap.isOpened()) return 0.0;
    return cap.get(cv::CAP_PROP_FPS);
}

void write_frames(const fs::path& path, std::span<const cv::Mat> frames, double fps) {
    if (frames.empty()) throw PreconditionError("no frames to write");
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    if (path.extension() == ".avi") {
        cv::VideoWriter writer(path.string(), cv::VideoWriter::fourcc('F', 'F', 'V', '1'), fps,
                               frames.front().size(), false);
        if (!writer.isOpened()) throw Error("cannot open video writer for " + path.string());
        for (const auto& f : frames) writer.write(to_gray(f));
        return;
    }
    fs::create_directories(path);
    for (std::size_t i = 0; i < frames.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%05zu.png", i);
        if (!cv::imwrite((path / name).string(), to_gray(frames[i]))) {
            throw Error("cannot write " + (path / name).string());
        }
    }
}

std::vector<std::uint8_t> encode_png(const cv::Mat& gray) {
    std::vector<std::uint8_t> buf;
    if (!cv::imencode(".png", to_gray(gray), buf)) throw Error("PNG encoding failed");
    return buf;
}

cv::Mat decode_png(std::span<const std::uint8_t> bytes) {
    if (bytes.empty()) throw ParseError("empty image payload");
    cv::Mat raw(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<std::uint8_t*>(bytes.data()));
    cv::Mat img = cv::imdecode(raw, cv::IMREAD_GRAYSCALE);
    if (img.empty()) throw ParseError("image payload is not a decodable PNG");
    return img;
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                  static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
    if (text.size() % 4 != 0) throw ParseError("base64 length is not a multiple of 4");
    std::vector<std::uint8_t> out(3 * text.size() / 4);
    const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                  static_cast<int>(text.size()));
    if (n < 0) throw ParseError("invalid base64 payload");
    // EVP_DecodeBlock keeps the zero bytes produced by '=' padding.
    std::size_t pad = 0;
    if (!text.empty() && text.back() == '=') ++pad;
    if (text.size() > 1 && text[text.size() - 2] == '=') ++pad;
    out.resize(static_cast<std::size_t>(n) - pad);
    return out;
}

}  // namespace echoguide::video
