// Copyright (C) 2026 The EchoGuide Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

// Decoder-only transformer in the LLaMA layout (RMSNorm, rotary positions,
// SwiGLU feed-forward, causal attention) with optional per-layer adaption
// prompts. The backbone itself is never trained here.
namespace echoguide::nn {

struct BackboneConfig {
    std::int64_t vocab_size = 259;  // 256 bytes + BOS, EOS, PAD
    std::int64_t dim = 64;
    std::int64_t layers = 2;
    std::int64_t heads = 4;
    std::int64_t ffn_hidden = 172;
    std::int64_t max_seq_len = 256;
    double rope_theta = 10000.0;
    double norm_eps = 1e-5;

    nlohmann::json to_json() const;
    static BackboneConfig from_json(const nlohmann::json& j);
};

/// Byte-level tokenizer matching the default vocabulary.
struct ByteTokenizer {
    static constexpr std::int64_t kBos = 256;
    static constexpr std::int64_t kEos = 257;
    static constexpr std::int64_t kPad = 258;

    static std::vector<std::int64_t> encode(std::string_view text, bool bos = true);
};

struct RMSNormImpl : torch::nn::Module {
    RMSNormImpl(std::int64_t dim, double eps);
    torch::Tensor forward(const torch::Tensor& x);

    torch::Tensor weight;
    double eps;
};
TORCH_MODULE(RMSNorm);

/// Learnable prompts for one layer plus a zero-initialized per-head gate.
struct AdaptionPrompt {
    torch::Tensor prompt;  // (B, P, dim), already combined with visual features
    torch::Tensor gate;    // (heads,)
};

struct AttentionImpl : torch::nn::Module {
    explicit AttentionImpl(const BackboneConfig& config);
    /// x: (B, T, dim); cos and sin: (T, head_dim / 2) rotary tables.
    torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& cos, const torch::Tensor& sin,
                          const AdaptionPrompt* adapter);

    std::int64_t heads, head_dim;
    torch::nn::Linear wq{nullptr}, wk{nullptr}, wv{nullptr}, wo{nullptr};
};
TORCH_MODULE(Attention);

struct FeedForwardImpl : torch::nn::Module {
    FeedForwardImpl(std::int64_t dim, std::int64_t hidden);
    torch::Tensor forward(const torch::Tensor& x);

    torch::nn::Linear w1{nullptr}, w2{nullptr}, w3{nullptr};
};
TORCH_MODULE(FeedForward);

struct TransformerBlockImpl : torch::nn::Module {
    explicit TransformerBlockImpl(const BackboneConfig& config);
    torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& cos, const torch::Tensor& sin,
                          const AdaptionPrompt* adapter);

    RMSNorm attention_norm{nullptr}, ffn_norm{nullptr};
    Attention attention{nullptr};
    FeedForward feed_forward{nullptr};
};
TORCH_MODULE(TransformerBlock);

struct LanguageBackboneImpl : torch::nn::Module {
    explicit LanguageBackboneImpl(const BackboneConfig& config);

    /// tokens (B, T) -> final-normed hidden states (B, T, dim). `adapters`
    /// is empty or holds one prompt per layer.
    torch::Tensor forward(const torch::Tensor& tokens, const std::vector<AdaptionPrompt>& adapters = {});

    BackboneConfig config;
    torch::nn::Embedding tok_embeddings{nullptr};
    torch::nn::ModuleList layers{nullptr};
    RMSNorm norm{nullptr};
};
TORCH_MODULE(LanguageBackbone);

/// Loads backbone.json + weights.pt from a directory.
LanguageBackbone load_backbone(const std::filesystem::path& dir);
void save_backbone(LanguageBackbone& backbone, const std::filesystem::path& dir);

/// Small randomly initialized backbone for tests and desk-scale runs.
LanguageBackbone make_tiny_backbone(std::uint64_t seed, const BackboneConfig& config = {});

}  // namespace echoguide::nn
