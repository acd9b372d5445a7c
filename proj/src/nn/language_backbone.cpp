// Copyright (C) 2026 The EchoGuide Authors
// SPDX-License-Identifier: Apache-2.0

#include "echoguide/nn/language_backbone.hpp"

#include <cmath>

#include "echoguide/error.hpp"
#include "echoguide/nn/tensor_util.hpp"

namespace echoguide::nn {

namespace tnn = torch::nn;
using nlohmann::json;

json BackboneConfig::to_json() const {
    return {{"vocab_size", vocab_size}, {"dim", dim},           {"layers", layers},
            {"heads", heads},           {"ffn_hidden", ffn_hidden}, {"max_seq_len", max_seq_len},
            {"rope_theta", rope_theta}, {"norm_eps", norm_eps}};
}

BackboneConfig BackboneConfig::from_json(const json& j) {
    BackboneConfig c;
    try {
        c.vocab_size = j.at("vocab_size").get<std::int64_t>();
        c.dim = j.at("dim").get<std::int64_t>();
        c.layers = j.at("layers").get<std::int64_t>();
        c.heads = j.at("heads").get<std::int64_t>();
        c.ffn_hidden = j.at("ffn_hidden").get<std::int64_t>();
        c.max_seq_len = j.value("max_seq_len", c.max_seq_len);
        c.rope_theta = j.value("rope_theta", c.rope_theta);
        c.norm_eps = j.value("norm_eps", c.norm_eps);
    } catch (const json::exception& e) {
        throw ParseError(std::string("backbone config: ") + e.what());
    }
    if (c.dim % c.heads != 0 || (c.dim / c.heads) % 2 != 0) {
        throw DomainError("backbone head size must be even and divide dim");
    }
    return c;
}

std::vector<std::int64_t> ByteTokenizer::encode(std::string_view text, bool bos) {
    std::vector<std::int64_t> ids;
    if (bos) ids.push_back(kBos);
    for (unsigned char ch : text) ids.push_back(ch);
    return ids;
}

RMSNormImpl::RMSNormImpl(std::int64_t dim, double eps_) : eps(eps_) {
    weight = register_parameter("weight", torch::ones({dim}));
}

torch::Tensor RMSNormImpl::forward(const torch::Tensor& x) {
    return x * torch::rsqrt(x.pow(2).mean(-1, true) + eps) * weight;
}

AttentionImpl::AttentionImpl(const BackboneConfig& c) : heads(c.heads), head_dim(c.dim / c.heads) {
    wq = register_module("wq", tnn::Linear(tnn::LinearOptions(c.dim, c.dim).bias(false)));
    wk = register_module("wk", tnn::Linear(tnn::LinearOptions(c.dim, c.dim).bias(false)));
    wv = register_module("wv", tnn::Linear(tnn::LinearOptions(c.dim, c.dim).bias(false)));
    wo = register_module("wo", tnn::Linear(tnn::LinearOptions(c.dim, c.dim).bias(false)));
}

namespace {

// Rotates interleaved (even, odd) pairs of the last axis.
torch::Tensor apply_rope(const torch::Tensor& x, const torch::Tensor& cos, const torch::Tensor& sin) {
    auto pairs = x.unflatten(-1, {-1, 2});
    auto x0 = pairs.select(-1, 0);
    auto x1 = pairs.select(-1, 1);
    return torch::stack({x0 * cos - x1 * sin, x0 * sin + x1 * cos}, -1).flatten(-2);
}

}  // namespace

torch::Tensor AttentionImpl::forward(const torch::Tensor& x, const torch::Tensor& cos, const torch::Tensor& sin,
                                     const AdaptionPrompt* adapter) {
    const auto b = x.size(0);
    const auto t = x.size(1);
    auto split = [&](const torch::Tensor& y, std::int64_t len) {
        return y.view({b, len, heads, head_dim}).transpose(1, 2);
    };
    auto q = apply_rope(split(wq(x), t), cos, sin);
    auto k = apply_rope(split(wk(x), t), cos, sin);
    auto v = split(wv(x), t);
    const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));

    auto scores = torch::matmul(q, k.transpose(-2, -1)) * scale;
    auto causal = torch::ones({t, t}, torch::TensorOptions().dtype(torch::kBool).device(x.device())).triu(1);
    scores = scores.masked_fill(causal, -std::numeric_limits<float>::infinity());
    auto out = torch::matmul(torch::softmax(scores, -1), v);

    if (adapter != nullptr) {
        const auto p = adapter->prompt.size(1);
        auto kp = split(wk(adapter->prompt), p);
        auto vp = split(wv(adapter->prompt), p);
        auto ps = torch::softmax(torch::matmul(q, kp.transpose(-2, -1)) * scale, -1);
        out = out + torch::matmul(ps * torch::tanh(adapter->gate).view({1, heads, 1, 1}), vp);
    }
    return wo(out.transpose(1, 2).reshape({b, t, heads * head_dim}));
}

FeedForwardImpl::FeedForwardImpl(std::int64_t dim, std::int64_t hidden) {
    w1 = register_module("w1", tnn::Linear(tnn::LinearOptions(dim, hidden).bias(false)));
    w2 = register_module("w2", tnn::Linear(tnn::LinearOptions(hidden, dim).bias(false)));
    w3 = register_module("w3", tnn::Linear(tnn::LinearOptions(dim, hidden).bias(false)));
}

torch::Tensor FeedForwardImpl::forward(const torch::Tensor& x) { return w2(torch::silu(w1(x)) * w3(x)); }

TransformerBlockImpl::TransformerBlockImpl(const BackboneConfig& c) {
    attention_norm = register_module("attention_norm", RMSNorm(c.dim, c.norm_eps));
    attention = register_module("attention", Attention(c));
    ffn_norm = register_module("ffn_norm", RMSNorm(c.dim, c.norm_eps));
    feed_forward = register_module("feed_forward", FeedForward(c.dim, c.ffn_hidden));
}

torch::Tensor TransformerBlockImpl::forward(const torch::Tensor& x, const torch::Tensor& cos, const torch::Tensor& sin,
                                            const AdaptionPrompt* adapter) {
    auto h = x + attention->forward(attention_norm(x), cos, sin, adapter);
    return h + feed_forward(ffn_norm(h));
}

LanguageBackboneImpl::LanguageBackboneImpl(const BackboneConfig& c) : config(c) {
    tok_embeddings = register_module("tok_embeddings", tnn::Embedding(c.vocab_size, c.dim));
    layers = register_module("layers", tnn::ModuleList());
    for (std::int64_t i = 0; i < c.layers; ++i) layers->push_back(TransformerBlock(c));
    norm = register_module("norm", RMSNorm(c.dim, c.norm_eps));
}

torch::Tensor LanguageBackboneImpl::forward(const torch::Tensor& tokens, const std::vector<AdaptionPrompt>& adapters) {
    if (tokens.dim() != 2) throw ShapeError("tokens must be (B, T)");
    const auto t = tokens.size(1);
    if (t > config.max_seq_len) throw ShapeError("token sequence longer than max_seq_len");
    if (!adapters.empty() && static_cast<std::int64_t>(adapters.size()) != config.layers) {
        throw ShapeError("one adaption prompt per layer expected");
    }
    const auto head_dim = config.dim / config.heads;
    auto freqs = torch::pow(config.rope_theta,
                            -torch::arange(0, head_dim, 2, torch::kFloat32) / static_cast<double>(head_dim));
    auto angles = torch::outer(torch::arange(t, torch::kFloat32), freqs).to(tokens.device());
    auto cos = angles.cos();
    auto sin = angles.sin();

    auto h = tok_embeddings(tokens);
    for (std::size_t i = 0; i < layers->size(); ++i) {
        const AdaptionPrompt* a = adapters.empty() ? nullptr : &adapters[i];
        h = layers[i]->as<TransformerBlock>()->forward(h, cos, sin, a);
    }
    return norm(h);
}

LanguageBackbone load_backbone(const std::filesystem::path& dir) {
    auto config = BackboneConfig::from_json(read_json(dir / "backbone.json"));
    LanguageBackbone backbone(config);
    const auto weights = dir / "weights.pt";
    if (!std::filesystem::exists(weights)) throw ParseError("missing " + weights.string());
    torch::load(backbone, weights.string());
    return backbone;
}

void save_backbone(LanguageBackbone& backbone, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_json(dir / "backbone.json", backbone->config.to_json());
    torch::save(backbone, (dir / "weights.pt").string());
}

LanguageBackbone make_tiny_backbone(std::uint64_t seed, const BackboneConfig& config) {
    torch::manual_seed(seed);
    LanguageBackbone backbone(config);
    torch::NoGradGuard no_grad;
    for (auto& p : backbone->named_parameters()) {
        if (p.key().find("norm") == std::string::npos) p.value().normal_(0.0, 0.02);
    }
    return backbone;
}

}  // namespace echoguide::nn
