// Copyright (C) 2026 The EchoGuide Authors
// SPDX-License-Identifier: Apache-2.0

#include "echoguide/nn/landmark_detector.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <random>

#include <opencv2/imgproc.hpp>

#include "echoguide/error.hpp"
#include "echoguide/landmark_schema.hpp"
#include "echoguide/nn/tensor_util.hpp"
#include "echoguide/video_io.hpp"

namespace echoguide::landmarks {

namespace tnn = torch::nn;
using nlohmann::json;

double LandmarkModelConfig::resolved_tau() const {
    return tau > 0.0 ? tau : 1.0 / (static_cast<double>(input_height) * input_width);
}

VisibilityGate LandmarkModelConfig::resolved_gate() const {
    auto def = VisibilityGate::for_frame(input_height, input_width);
    VisibilityGate g = gate;
    if (g.p_vis <= 0.0) g.p_vis = def.p_vis;
    return g;
}

json LandmarkModelConfig::to_json() const {
    const auto g = resolved_gate();
    return {
        {"schema_version", kCheckpointSchemaVersion},
        {"encoder_depth", encoder_depth},
        {"width_multiplier", width_multiplier},
        {"input_hw", {input_height, input_width}},
        {"num_landmarks", kNumLandmarks},
        {"vis_weight_map", {{"1", vis_weight_map.weights[0]}, {"2", vis_weight_map.weights[1]}, {"3", vis_weight_map.weights[2]}}},
        {"tau", resolved_tau()},
        {"r_vis", g.r_vis},
        {"p_vis", g.p_vis},
    };
}

LandmarkModelConfig LandmarkModelConfig::from_json(const json& j) {
    try {
        if (j.at("schema_version").get<int>() != kCheckpointSchemaVersion) {
            throw ParseError("unsupported landmark checkpoint schema_version " + j.at("schema_version").dump());
        }
        if (j.at("num_landmarks").get<int>() != kNumLandmarks) {
            throw ParseError("checkpoint num_landmarks must be 47");
        }
        LandmarkModelConfig c;
        c.encoder_depth = j.at("encoder_depth").get<int>();
        c.width_multiplier = j.at("width_multiplier").get<double>();
        const auto& hw = j.at("input_hw");
        c.input_height = hw.at(0).get<int>();
        c.input_width = hw.at(1).get<int>();
        const auto& vm = j.at("vis_weight_map");
        for (std::size_t i = 0; i < 3; ++i) c.vis_weight_map.weights[i] = vm.at(std::to_string(i + 1)).get<double>();
        c.tau = j.at("tau").get<double>();
        c.gate.r_vis = j.at("r_vis").get<double>();
        c.gate.p_vis = j.at("p_vis").get<double>();
        return c;
    } catch (const json::exception& e) {
        throw ParseError(std::string("landmark checkpoint config: ") + e.what());
    }
}

LandmarkNetImpl::LandmarkNetImpl(const LandmarkModelConfig& config) {
    nn::ResNetEncoderOptions eo;
    eo.depth = config.encoder_depth;
    eo.in_channels = 3;
    eo.width = config.width_multiplier;
    encoder = register_module("encoder", nn::ResNetEncoder(eo));
    if (config.pretrained_encoder) torch::load(encoder, config.pretrained_encoder->string());

    decoder = tnn::Sequential();
    std::int64_t in = encoder->out_channels();
    for (std::int64_t base : {512, 256, 128, 64, 64}) {
        const auto out = nn::scaled_channels(base, config.width_multiplier);
        decoder->push_back(tnn::ConvTranspose2d(tnn::ConvTranspose2dOptions(in, out, 4).stride(2).padding(1).bias(false)));
        decoder->push_back(tnn::BatchNorm2d(out));
        decoder->push_back(tnn::ReLU());
        in = out;
    }
    register_module("decoder", decoder);
    head = register_module("head", tnn::Conv2d(tnn::Conv2dOptions(in, kNumLandmarks, 1)));
}

torch::Tensor LandmarkNetImpl::forward(torch::Tensor x) {
    if (x.dim() != 4) throw ShapeError("landmark model expects (B, C, H, W)");
    const auto h = x.size(2), w = x.size(3);
    if (h < 1 || w < 1) throw ShapeError("landmark model input is empty");
    if (x.size(1) == 1) x = x.expand({-1, 3, -1, -1});
    // Zero-pad bottom/right to the encoder stride and crop the logits back.
    const auto pad_h = (32 - h % 32) % 32, pad_w = (32 - w % 32) % 32;
    if (pad_h || pad_w) x = torch::constant_pad_nd(x, {0, pad_w, 0, pad_h});
    auto out = head(decoder->forward(encoder(x)));
    if (pad_h || pad_w) out = out.slice(2, 0, h).slice(3, 0, w);
    return out;
}

namespace {

void check_batch(const torch::Tensor& logits, const AnnotationBatch& batch) {
    if (logits.dim() != 4) throw ShapeError("logits must be (B, L, H, W)");
    const auto b = logits.size(0);
    const auto l = logits.size(1);
    if (batch.targets.sizes() != torch::IntArrayRef{b, l} || batch.mask.sizes() != torch::IntArrayRef{b, l} ||
        batch.vis_w.dim() != 1 || batch.vis_w.size(0) != b) {
        throw ShapeError("annotation batch does not match logits shape");
    }
    const auto hw = logits.size(2) * logits.size(3);
    if (batch.targets.numel() > 0 &&
        (batch.targets.min().item<std::int64_t>() < 0 || batch.targets.max().item<std::int64_t>() >= hw)) {
        throw DomainError("target index outside [0, H*W)");
    }
    if (!nn::all_finite(logits)) throw NumericError("non-finite logits");
}

}  // namespace

torch::Tensor masked_weighted_nll(const torch::Tensor& logits, const AnnotationBatch& batch) {
    check_batch(logits, batch);
    const auto b = logits.size(0);
    const auto l = logits.size(1);
    auto logp = torch::log_softmax(logits.reshape({b, l, -1}), 2);
    auto picked = logp.gather(2, batch.targets.unsqueeze(2)).squeeze(2);
    auto m = batch.mask.to(logits.scalar_type());
    auto w = batch.vis_w.to(logits.scalar_type()).unsqueeze(1);
    return -(picked * m * w).sum(1).mean();
}

torch::Tensor masked_weighted_nll_grad(const torch::Tensor& logits, const AnnotationBatch& batch) {
    check_batch(logits, batch);
    const auto b = logits.size(0);
    const auto l = logits.size(1);
    auto flat = logits.detach().reshape({b, l, -1});
    auto grad = torch::softmax(flat, 2);
    grad.scatter_add_(2, batch.targets.unsqueeze(2), -torch::ones({b, l, 1}, flat.options()));
    auto scale = batch.mask.to(flat.scalar_type()) * batch.vis_w.to(flat.scalar_type()).unsqueeze(1) /
                 static_cast<double>(b);
    return (grad * scale.unsqueeze(2)).reshape(logits.sizes());
}

torch::Tensor spatial_softmax(const torch::Tensor& logits) {
    const auto sizes = logits.sizes().vec();
    auto flat = logits.reshape({sizes[0], sizes[1], -1});
    // torch::softmax subtracts the per-row maximum internally.
    return torch::softmax(flat, 2).reshape(sizes);
}

std::vector<LandmarkPrediction> decode_landmarks(const torch::Tensor& probs, const UncertaintyConfig& uncertainty,
                                                 const VisibilityGate& gate) {
    if (probs.dim() != 3) throw ShapeError("probability maps must be (L, H, W)");
    auto c = probs.detach().to(torch::kFloat32).contiguous().cpu();
    const int l = static_cast<int>(c.size(0));
    const int h = static_cast<int>(c.size(1));
    const int w = static_cast<int>(c.size(2));
    const float* data = c.data_ptr<float>();
    std::vector<LandmarkPrediction> out;
    out.reserve(static_cast<std::size_t>(l));
    for (int i = 0; i < l; ++i) {
        std::span<const float> map(data + static_cast<std::ptrdiff_t>(i) * h * w, static_cast<std::size_t>(h * w));
        out.push_back(decode_channel(i, map, h, w, uncertainty, gate));
    }
    return out;
}

ingest::LandmarkAnnotation rescale_annotation(const ingest::LandmarkAnnotation& annotation, cv::Size from,
                                              cv::Size to) {
    if (from == to) return annotation;
    const double sx = static_cast<double>(to.width) / from.width;
    const double sy = static_cast<double>(to.height) / from.height;
    auto out = annotation;
    for (auto& [id, p] : out.points) {
        // Pixel centres map through the continuous grid.
        p.x = (p.x + 0.5) * sx - 0.5;
        p.y = (p.y + 0.5) * sy - 0.5;
    }
    return out;
}

AnnotationBatch make_annotation_batch(std::span<const ingest::LandmarkAnnotation> annotations, int height,
                                      int width, const VisibilityWeightMap& weights) {
    const auto b = static_cast<std::int64_t>(annotations.size());
    auto targets = torch::zeros({b, kNumLandmarks}, torch::kInt64);
    auto mask = torch::zeros({b, kNumLandmarks}, torch::kBool);
    auto vis_w = torch::ones({b}, torch::kFloat32);
    auto ta = targets.accessor<std::int64_t, 2>();
    auto ma = mask.accessor<bool, 2>();
    auto va = vis_w.accessor<float, 1>();
    for (std::int64_t i = 0; i < b; ++i) {
        const auto& ann = annotations[static_cast<std::size_t>(i)];
        for (const auto& [id, p] : ann.points) {
            if (!is_valid_id(id) || !ann.scoreable(id)) continue;
            ta[i][id] = encode_target_index(p.x, p.y, width, height);
            ma[i][id] = true;
        }
        va[i] = static_cast<float>(weights.sample_weight(ann));
    }
    return {targets, mask, vis_w};
}

LandmarkDetector::LandmarkDetector(LandmarkModelConfig config) : config_(std::move(config)) {
    net_ = LandmarkNet(config_);
    net_->eval();
}

LandmarkDetector LandmarkDetector::load(const std::filesystem::path& dir) {
    auto config = LandmarkModelConfig::from_json(nn::read_json(dir / "config.json"));
    LandmarkDetector det(config);
    const auto weights = dir / "weights.pt";
    if (!std::filesystem::exists(weights)) throw ParseError("missing " + weights.string());
    torch::load(det.net_, weights.string());
    det.net_->eval();
    return det;
}

void LandmarkDetector::save(const std::filesystem::path& dir, const std::optional<json>& training) {
    std::filesystem::create_directories(dir);
    nn::write_json(dir / "config.json", config_.to_json());
    torch::save(net_, (dir / "weights.pt").string());
    if (training) nn::write_json(dir / "training.json", *training);
}

torch::Tensor LandmarkDetector::prepare(std::span<const cv::Mat> frames) const {
    for (const auto& f : frames) {
        if (f.size() != config_.input_size()) {
            throw ShapeError("frame " + std::to_string(f.cols) + "x" + std::to_string(f.rows) +
                             " does not match detector input " + std::to_string(config_.input_width) + "x" +
                             std::to_string(config_.input_height));
        }
    }
    return nn::frames_to_batch(frames, config_.input_size());
}

std::vector<LandmarkPrediction> LandmarkDetector::predict(const cv::Mat& frame) {
    return predict_batch(std::span<const cv::Mat>(&frame, 1)).front();
}

std::vector<std::vector<LandmarkPrediction>> LandmarkDetector::predict_batch(std::span<const cv::Mat> frames) {
    if (frames.empty()) return {};
    torch::NoGradGuard no_grad;
    net_->eval();
    auto probs = spatial_softmax(net_->forward(prepare(frames)));
    UncertaintyConfig u = uncertainty;
    if (u.tau <= 0.0) u.tau = config_.resolved_tau();
    const auto gate = config_.resolved_gate();
    std::vector<std::vector<LandmarkPrediction>> out;
    for (std::int64_t i = 0; i < probs.size(0); ++i) out.push_back(decode_landmarks(probs[i], u, gate));
    return out;
}

std::vector<LandmarkPrediction> LandmarkDetector::predict_rescaled(const cv::Mat& frame) {
    const auto size = config_.input_size();
    if (frame.size() == size) return predict(frame);
    cv::Mat resized;
    cv::resize(video::to_gray(frame), resized, size, 0.0, 0.0, cv::INTER_AREA);
    auto preds = predict(resized);
    const double sx = static_cast<double>(frame.cols) / size.width;
    const double sy = static_cast<double>(frame.rows) / size.height;
    for (auto& p : preds) {
        p.x = (p.x + 0.5) * sx - 0.5;
        p.y = (p.y + 0.5) * sy - 0.5;
        p.radius *= std::sqrt(sx * sy);
    }
    return preds;
}

json LandmarkTrainResult::to_json() const {
    json e = json::array();
    for (const auto& log : epochs) {
        json row = {{"epoch", log.epoch}, {"steps", log.steps}, {"train_loss", log.train_loss}};
        row["val_loss"] = log.val_loss ? json(*log.val_loss) : json(nullptr);
        e.push_back(row);
    }
    return {{"epochs", e}, {"step_losses", step_losses}};
}

namespace {

std::vector<LandmarkSample> to_model_space(std::span<const LandmarkSample> samples, cv::Size size) {
    std::vector<LandmarkSample> out;
    out.reserve(samples.size());
    for (const auto& s : samples) {
        LandmarkSample r;
        cv::Mat gray = video::to_gray(s.frame);
        r.annotation = rescale_annotation(s.annotation, gray.size(), size);
        if (gray.size() != size) cv::resize(gray, gray, size, 0.0, 0.0, cv::INTER_AREA);
        r.frame = gray;
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace

double landmark_loss(LandmarkDetector& detector, std::span<const LandmarkSample> samples, int batch_size) {
    if (samples.empty()) throw PreconditionError("no samples to evaluate");
    const auto& cfg = detector.config();
    auto prepared = to_model_space(samples, cfg.input_size());
    torch::NoGradGuard no_grad;
    detector.net()->eval();
    double total = 0.0;
    const auto step = static_cast<std::size_t>(std::max(1, batch_size));
    for (std::size_t start = 0; start < prepared.size(); start += step) {
        const auto end = std::min(prepared.size(), start + step);
        std::vector<cv::Mat> frames;
        std::vector<ingest::LandmarkAnnotation> anns;
        for (std::size_t i = start; i < end; ++i) {
            frames.push_back(prepared[i].frame);
            anns.push_back(prepared[i].annotation);
        }
        auto batch = make_annotation_batch(anns, cfg.input_height, cfg.input_width, cfg.vis_weight_map);
        auto logits = detector.net()->forward(nn::frames_to_batch(frames, cfg.input_size()));
        total += masked_weighted_nll(logits, batch).item<double>() * static_cast<double>(end - start);
    }
    return total / static_cast<double>(prepared.size());
}

LandmarkTrainResult train_landmark_detector(LandmarkDetector& detector, std::span<const LandmarkSample> train,
                                            std::span<const LandmarkSample> val, const LandmarkTrainConfig& config,
                                            const std::function<void(const LandmarkEpochLog&)>& on_epoch) {
    if (train.empty()) throw PreconditionError("empty landmark training set");
    const auto& cfg = detector.config();
    const auto size = cfg.input_size();
    auto prepared = to_model_space(train, size);

    nn::set_deterministic(config.seed);
    std::mt19937_64 rng(config.seed);
    auto net = detector.net();
    torch::optim::Adam optimizer(net->parameters(), torch::optim::AdamOptions(config.learning_rate));

    std::vector<std::size_t> order(prepared.size());
    std::iota(order.begin(), order.end(), 0);
    const auto batch_size = static_cast<std::size_t>(std::max(1, config.batch_size));

    LandmarkTrainResult result;
    int total_steps = 0;
    bool capped = false;
    for (int epoch = 1; epoch <= config.epochs && !capped; ++epoch) {
        if (config.shuffle) std::shuffle(order.begin(), order.end(), rng);
        net->train();
        LandmarkEpochLog log;
        log.epoch = epoch;
        double sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += batch_size) {
            const auto end = std::min(order.size(), start + batch_size);
            std::vector<cv::Mat> frames;
            std::vector<ingest::LandmarkAnnotation> anns;
            for (std::size_t k = start; k < end; ++k) {
                const auto& s = prepared[order[k]];
                if (config.augment) {
                    auto aug = ingest::augment_frame(s.frame, s.annotation, config.ranges, rng());
                    frames.push_back(aug.image);
                    anns.push_back(*aug.landmarks);
                } else {
                    frames.push_back(s.frame);
                    anns.push_back(s.annotation);
                }
            }
            auto batch = make_annotation_batch(anns, cfg.input_height, cfg.input_width, cfg.vis_weight_map);
            optimizer.zero_grad();
            auto logits = net->forward(nn::frames_to_batch(frames, size));
            auto loss = masked_weighted_nll(logits, batch);
            const double value = loss.item<double>();
            if (!std::isfinite(value)) {
                throw NumericError("landmark loss diverged at epoch " + std::to_string(epoch) + ", step " +
                                   std::to_string(total_steps + 1));
            }
            loss.backward();
            optimizer.step();
            result.step_losses.push_back(value);
            sum += value;
            ++log.steps;
            ++total_steps;
            if (config.max_steps > 0 && total_steps >= config.max_steps) {
                capped = true;
                break;
            }
        }
        log.train_loss = sum / std::max(1, log.steps);
        if (!val.empty()) log.val_loss = landmark_loss(detector, val);
        result.epochs.push_back(log);
        if (on_epoch) on_epoch(log);
    }
    net->eval();
    return result;
}

LandmarkErrorReport evaluate_detector(LandmarkDetector& detector, std::span<const LandmarkSample> samples) {
    if (samples.empty()) throw PreconditionError("no samples to evaluate");
    auto prepared = to_model_space(samples, detector.config().input_size());
    std::vector<cv::Mat> frames;
    std::vector<ingest::LandmarkAnnotation> anns;
    for (auto& s : prepared) {
        frames.push_back(s.frame);
        anns.push_back(s.annotation);
    }
    std::vector<std::vector<LandmarkPrediction>> preds;
    constexpr std::size_t kChunk = 64;
    for (std::size_t start = 0; start < frames.size(); start += kChunk) {
        const auto n = std::min(kChunk, frames.size() - start);
        auto part = detector.predict_batch(std::span<const cv::Mat>(frames.data() + start, n));
        preds.insert(preds.end(), part.begin(), part.end());
    }
    return evaluate_landmark_error(preds, anns);
}

std::vector<LandmarkSample> collect_samples(const ingest::EchoNetDataset& dataset, std::optional<ingest::Split> split) {
    std::map<std::string, std::vector<cv::Mat>> loaded;
    std::vector<LandmarkSample> out;
    for (const auto& ann : dataset.annotations) {
        const auto* clip = dataset.find_clip(ann.clip_id);
        if (clip == nullptr) continue;
        if (split && clip->split != *split) continue;
        const std::vector<cv::Mat>* frames = &clip->frames;
        if (frames->empty()) {
            auto it = loaded.find(clip->clip_id);
            if (it == loaded.end()) it = loaded.emplace(clip->clip_id, video::read_frames(clip->video_path)).first;
            frames = &it->second;
        }
        if (ann.frame_index < 0 || static_cast<std::size_t>(ann.frame_index) >= frames->size()) {
            throw ConsistencyError("annotation frame " + std::to_string(ann.frame_index) + " outside clip " +
                                   clip->clip_id);
        }
        out.push_back({(*frames)[static_cast<std::size_t>(ann.frame_index)], ann});
    }
    return out;
}

}  // namespace echoguide::landmarks
