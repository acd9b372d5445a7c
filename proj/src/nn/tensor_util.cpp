// Copyright (C) 2026 The EchoGuide Authors
// SPDX-License-Identifier: Apache-2.0

#include "echoguide/nn/tensor_util.hpp"

#include <cstdio>
#include <fstream>

#include <openssl/evp.h>
#include <opencv2/imgproc.hpp>

#include "echoguide/error.hpp"
#include "echoguide/video_io.hpp"

namespace echoguide::nn {

torch::Tensor frame_to_tensor(const cv::Mat& frame, cv::Size size) {
    cv::Mat gray = video::to_gray(frame);
    if (gray.empty()) throw ShapeError("empty frame");
    if (gray.size() != size) cv::resize(gray, gray, size, 0.0, 0.0, cv::INTER_AREA);
    cv::Mat f;
    gray.convertTo(f, CV_32FC1, 1.0 / 255.0);
    auto t = torch::from_blob(f.data, {1, f.rows, f.cols}, torch::kFloat32).clone();
    return (t - kPixelMean) / kPixelStd;
}

torch::Tensor frames_to_batch(std::span<const cv::Mat> frames, cv::Size size) {
    std::vector<torch::Tensor> items;
    items.reserve(frames.size());
    for (const auto& f : frames) items.push_back(frame_to_tensor(f, size));
    return torch::stack(items);
}

void set_deterministic(std::uint64_t seed) {
    torch::manual_seed(seed);
    at::globalContext().setDeterministicAlgorithms(true, false);
}

std::string parameter_digest(const torch::nn::Module& module) {
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    auto feed = [ctx](const std::string& name, const torch::Tensor& t) {
        EVP_DigestUpdate(ctx, name.data(), name.size());
        auto c = t.detach().contiguous().cpu();
        EVP_DigestUpdate(ctx, c.data_ptr(), c.numel() * c.element_size());
    };
    for (const auto& p : module.named_parameters(true)) feed(p.key(), p.value());
    for (const auto& b : module.named_buffers(true)) feed(b.key(), b.value());
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, digest, &len);
    EVP_MD_CTX_free(ctx);
    std::string hex;
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof(buf), "%02x", digest[i]);
        hex += buf;
    }
    return hex;
}

std::vector<torch::Tensor> snapshot_state(const torch::nn::Module& module) {
    std::vector<torch::Tensor> out;
    for (const auto& p : module.parameters(true)) out.push_back(p.detach().clone());
    for (const auto& b : module.buffers(true)) out.push_back(b.detach().clone());
    return out;
}

void restore_state(torch::nn::Module& module, const std::vector<torch::Tensor>& snapshot) {
    torch::NoGradGuard no_grad;
    std::size_t i = 0;
    for (auto& p : module.parameters(true)) p.copy_(snapshot.at(i++));
    for (auto& b : module.buffers(true)) b.copy_(snapshot.at(i++));
}

nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& value) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << value.dump(2) << '\n';
}

bool all_finite(const torch::Tensor& t) { return torch::isfinite(t).all().item<bool>(); }

}  // namespace echoguide::nn
