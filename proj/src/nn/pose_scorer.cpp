// Copyright (C) 2026 The EchoGuide Authors
// SPDX-License-Identifier: Apache-2.0

#include "echoguide/nn/pose_scorer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <opencv2/imgproc.hpp>

#include "echoguide/error.hpp"
#include "echoguide/landmark_schema.hpp"
#include "echoguide/nn/tensor_util.hpp"
#include "echoguide/video_io.hpp"

namespace echoguide::pose {

namespace tnn = torch::nn;
using landmarks::LandmarkPrediction;
using nlohmann::json;

torch::Tensor render_landmark_channels(std::span<const LandmarkPrediction> predictions, cv::Size source,
                                       cv::Size target, double sigma) {
    auto out = torch::zeros({kLandmarkChannels, target.height, target.width});
    if (predictions.empty()) return out;
    const double sx = static_cast<double>(target.width) / source.width;
    const double sy = static_cast<double>(target.height) / source.height;
    auto xs = torch::arange(target.width, torch::kFloat64).view({1, -1});
    auto ys = torch::arange(target.height, torch::kFloat64).view({-1, 1});
    for (std::size_t k = 0; k < landmarks::kKeySubset.size(); ++k) {
        const auto id = landmarks::kKeySubset[k];
        auto it = std::find_if(predictions.begin(), predictions.end(), [id](const auto& p) { return p.id == id; });
        if (it == predictions.end() || !it->visible) continue;
        const double cx = (it->x + 0.5) * sx - 0.5;
        const double cy = (it->y + 0.5) * sy - 0.5;
        auto d2 = (xs - cx).pow(2) + (ys - cy).pow(2);
        out[static_cast<std::int64_t>(k)] = torch::exp(-d2 / (2.0 * sigma * sigma)).to(torch::kFloat32);
    }
    return out;
}

json PoseModelConfig::to_json() const {
    json adapter_json = {
        {"backbone", adapter.backbone.to_json()},
        {"backbone_dir", adapter.backbone_dir ? json(adapter.backbone_dir->string()) : json(nullptr)},
        {"backbone_seed", adapter.backbone_seed},
        {"prompt_length", adapter.prompt_length},
        {"instruction", adapter.instruction},
    };
    return {
        {"schema_version", kPoseSchemaVersion},
        {"architecture", std::string(to_string(architecture))},
        {"mode", std::string(to_string(mode))},
        {"encoder_depth", encoder_depth},
        {"width_multiplier", width_multiplier},
        {"input_hw", {input_height, input_width}},
        {"blob_sigma", blob_sigma},
        {"adapter", adapter_json},
    };
}

PoseModelConfig PoseModelConfig::from_json(const json& j) {
    PoseModelConfig c;
    try {
        if (j.at("schema_version").get<int>() != kPoseSchemaVersion) throw ParseError("unsupported pose schema_version");
        auto arch = parse_architecture(j.at("architecture").get<std::string>());
        auto mode = parse_mode(j.at("mode").get<std::string>());
        if (!arch || !mode) throw ParseError("unknown pose architecture or mode");
        c.architecture = *arch;
        c.mode = *mode;
        c.encoder_depth = j.at("encoder_depth").get<int>();
        c.width_multiplier = j.at("width_multiplier").get<double>();
        c.input_height = j.at("input_hw").at(0).get<int>();
        c.input_width = j.at("input_hw").at(1).get<int>();
        c.blob_sigma = j.value("blob_sigma", c.blob_sigma);
        if (j.contains("adapter")) {
            const auto& a = j.at("adapter");
            c.adapter.backbone = nn::BackboneConfig::from_json(a.at("backbone"));
            if (a.contains("backbone_dir") && !a.at("backbone_dir").is_null()) {
                c.adapter.backbone_dir = a.at("backbone_dir").get<std::string>();
            }
            c.adapter.backbone_seed = a.value("backbone_seed", c.adapter.backbone_seed);
            c.adapter.prompt_length = a.value("prompt_length", c.adapter.prompt_length);
            c.adapter.instruction = a.value("instruction", c.adapter.instruction);
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("pose config: ") + e.what());
    }
    return c;
}

namespace {

nn::ResNetEncoder make_encoder(const PoseModelConfig& config) {
    nn::ResNetEncoderOptions eo;
    eo.depth = config.encoder_depth;
    eo.in_channels = config.input_channels();
    eo.width = config.width_multiplier;
    return nn::ResNetEncoder(eo);
}

torch::Tensor pooled(nn::ResNetEncoder& encoder, const torch::Tensor& x) {
    return torch::adaptive_avg_pool2d(encoder->forward(x), {1, 1}).flatten(1);
}

}  // namespace

PoseRegressorImpl::PoseRegressorImpl(const PoseModelConfig& config) {
    encoder = register_module("encoder", make_encoder(config));
    fc = register_module("fc", tnn::Linear(encoder->out_channels(), 1));
}

torch::Tensor PoseRegressorImpl::forward(const torch::Tensor& x) { return fc(pooled(encoder, x)).squeeze(1); }

PoseAdapterImpl::PoseAdapterImpl(const PoseModelConfig& config, nn::LanguageBackbone bb) {
    const auto& bc = bb->config;
    encoder = register_module("encoder", make_encoder(config));
    visual_proj = register_module("visual_proj", tnn::Linear(encoder->out_channels(), bc.dim));
    prompts = register_parameter("prompts", torch::randn({bc.layers, config.adapter.prompt_length, bc.dim}) * 0.02);
    gates = register_parameter("gates", torch::zeros({bc.layers, bc.heads}));
    head = register_module("head", tnn::Linear(bc.dim, 3));
    backbone = register_module("backbone", std::move(bb));
    for (auto& p : backbone->parameters()) p.requires_grad_(false);
    auto ids = nn::ByteTokenizer::encode(config.adapter.instruction);
    instruction = register_buffer("instruction", torch::tensor(ids, torch::kInt64).unsqueeze(0));
}

torch::Tensor PoseAdapterImpl::forward(const torch::Tensor& x) {
    const auto b = x.size(0);
    auto visual = visual_proj(pooled(encoder, x)).unsqueeze(1);  // (B, 1, dim)
    std::vector<nn::AdaptionPrompt> adapters;
    for (std::int64_t l = 0; l < prompts.size(0); ++l) {
        adapters.push_back({prompts[l].unsqueeze(0) + visual, gates[l]});
    }
    backbone->eval();
    auto hidden = backbone->forward(instruction.expand({b, -1}), adapters);
    return head(hidden.select(1, hidden.size(1) - 1));
}

std::vector<torch::Tensor> PoseAdapterImpl::trainable_parameters() {
    std::vector<torch::Tensor> out;
    for (const auto& p : named_parameters(true)) {
        if (p.key().rfind("backbone.", 0) != 0) out.push_back(p.value());
    }
    return out;
}

PoseScorer::PoseScorer(PoseModelConfig config) : config_(std::move(config)) {
    if (config_.architecture == Architecture::regression) {
        regressor_ = PoseRegressor(config_);
    } else {
        auto bb = config_.adapter.backbone_dir ? nn::load_backbone(*config_.adapter.backbone_dir)
                                               : nn::make_tiny_backbone(config_.adapter.backbone_seed,
                                                                        config_.adapter.backbone);
        config_.adapter.backbone = bb->config;
        adapter_ = PoseAdapter(config_, bb);
    }
    module().eval();
}

torch::nn::Module& PoseScorer::module() {
    if (regressor_) return *regressor_;
    return *adapter_;
}

std::string PoseScorer::backbone_digest() {
    if (!adapter_) throw PreconditionError("regression scorers have no language backbone");
    return nn::parameter_digest(*adapter_->backbone);
}

PoseScorer PoseScorer::load(const std::filesystem::path& dir) {
    const auto j = nn::read_json(dir / "config.json");
    auto config = PoseModelConfig::from_json(j);
    // Weights carry the backbone too, so do not require the original directory.
    config.adapter.backbone_dir.reset();
    PoseScorer scorer(config);
    const auto weights = dir / "weights.pt";
    if (!std::filesystem::exists(weights)) throw ParseError("missing " + weights.string());
    if (scorer.regressor_) {
        torch::load(scorer.regressor_, weights.string());
    } else {
        torch::load(scorer.adapter_, weights.string());
        if (j.contains("backbone_digest") && j.at("backbone_digest").get<std::string>() != scorer.backbone_digest()) {
            throw InvariantViolation("backbone digest in " + dir.string() + " does not match its weights");
        }
    }
    scorer.config_ = PoseModelConfig::from_json(j);
    scorer.module().eval();
    return scorer;
}

void PoseScorer::save(const std::filesystem::path& dir, const std::optional<json>& training) {
    std::filesystem::create_directories(dir);
    auto j = config_.to_json();
    if (adapter_) j["backbone_digest"] = backbone_digest();
    nn::write_json(dir / "config.json", j);
    if (regressor_) {
        torch::save(regressor_, (dir / "weights.pt").string());
    } else {
        torch::save(adapter_, (dir / "weights.pt").string());
    }
    if (training) nn::write_json(dir / "training.json", *training);
}

torch::Tensor PoseScorer::make_input(const cv::Mat& frame, std::span<const LandmarkPrediction> landmarks) const {
    const auto size = config_.input_size();
    auto image = config_.mode == InputMode::landmarks_only ? torch::zeros({1, size.height, size.width})
                                                           : nn::frame_to_tensor(frame, size);
    if (!uses_landmarks(config_.mode)) return image;
    return torch::cat({image, render_landmark_channels(landmarks, frame.size(), size, config_.blob_sigma)}, 0);
}

torch::Tensor PoseScorer::forward(const torch::Tensor& inputs) {
    if (inputs.dim() != 4 || inputs.size(1) != config_.input_channels()) {
        throw ShapeError("pose input must be (B, " + std::to_string(config_.input_channels()) + ", H, W)");
    }
    return regressor_ ? regressor_->forward(inputs) : adapter_->forward(inputs);
}

std::vector<PoseOutput> PoseScorer::score_batch(const torch::Tensor& inputs) {
    torch::NoGradGuard no_grad;
    module().eval();
    auto raw = forward(inputs).to(torch::kFloat64).contiguous();
    std::vector<PoseOutput> out;
    if (regressor_) {
        for (std::int64_t i = 0; i < raw.size(0); ++i) {
            PoseOutput o;
            o.score = PoseScore(raw[i].item<double>());
            o.category = score_to_category(o.score);
            out.push_back(o);
        }
        return out;
    }
    auto probs = torch::softmax(raw, 1);
    for (std::int64_t i = 0; i < raw.size(0); ++i) {
        std::array<double, 3> p{};
        for (std::size_t c = 0; c < 3; ++c) p[c] = probs[i][static_cast<std::int64_t>(c)].item<double>();
        const auto best = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
        PoseOutput o;
        o.category = static_cast<PoseCategory>(best);
        o.score = PoseScore(category_midpoint(o.category));
        o.probabilities = p;
        out.push_back(o);
    }
    return out;
}

PoseOutput PoseScorer::score(const cv::Mat& frame, std::span<const LandmarkPrediction> landmarks) {
    return score_batch(make_input(frame, landmarks).unsqueeze(0)).front();
}

json PoseTrainResult::to_json() const {
    json e = json::array();
    for (const auto& log : epochs) {
        e.push_back({{"epoch", log.epoch}, {"train_loss", log.train_loss}, {"val_loss", log.val_loss},
                     {"selected", log.selected}});
    }
    json j = {{"epochs", e},
              {"selected_epoch", selection.epoch + 1},
              {"trailing_mean_val_loss", selection.trailing_mean},
              {"selection_degraded", selection.degraded},
              {"class_weights", {{"green", weights.green}, {"yellow", weights.yellow}, {"red", weights.red}}}};
    if (backbone_digest_before) j["backbone_digest_before"] = *backbone_digest_before;
    if (backbone_digest_after) j["backbone_digest_after"] = *backbone_digest_after;
    return j;
}

double triangular_lr(std::size_t step, std::size_t half_cycle, double lo, double hi) {
    if (half_cycle == 0) return hi;
    const auto pos = step % (2 * half_cycle);
    const double frac = pos <= half_cycle ? static_cast<double>(pos) / half_cycle
                                          : static_cast<double>(2 * half_cycle - pos) / half_cycle;
    return lo + (hi - lo) * frac;
}

namespace {

// Frames resized to the model input with landmarks mapped alongside.
struct Prepared {
    cv::Mat frame;
    std::vector<LandmarkPrediction> landmarks;
    PoseCategory category;
    double score;
};

std::vector<Prepared> prepare(std::span<const PoseSample> samples, cv::Size size) {
    std::vector<Prepared> out;
    out.reserve(samples.size());
    for (const auto& s : samples) {
        cv::Mat gray = video::to_gray(s.frame);
        const double sx = static_cast<double>(size.width) / gray.cols;
        const double sy = static_cast<double>(size.height) / gray.rows;
        if (gray.size() != size) cv::resize(gray, gray, size, 0.0, 0.0, cv::INTER_AREA);
        Prepared p{gray, s.landmarks, s.category, s.score};
        for (auto& l : p.landmarks) {
            l.x = (l.x + 0.5) * sx - 0.5;
            l.y = (l.y + 0.5) * sy - 0.5;
        }
        out.push_back(std::move(p));
    }
    return out;
}

torch::Tensor sample_input(const PoseScorer& scorer, const Prepared& p, bool augment,
                           const ingest::AugmentationRanges& ranges, std::mt19937_64& rng) {
    if (!augment) return scorer.make_input(p.frame, p.landmarks);
    ingest::LandmarkAnnotation ann;
    for (const auto& l : p.landmarks) {
        if (l.visible) ann.points[l.id] = {l.x, l.y, 1, true};
    }
    auto aug = ingest::augment_frame(p.frame, ann, ranges, rng());
    std::vector<LandmarkPrediction> moved;
    for (const auto& [id, pt] : aug.landmarks->points) {
        moved.push_back({id, pt.x, pt.y, 1.0, 0.0, pt.in_bounds});
    }
    return scorer.make_input(aug.image, moved);
}

ClassWeights weights_for(std::span<const PoseSample> samples) {
    CategoryCounts counts;
    for (const auto& s : samples) {
        switch (s.category) {
            case PoseCategory::green: ++counts.green; break;
            case PoseCategory::yellow: ++counts.yellow; break;
            case PoseCategory::red: ++counts.red; break;
        }
    }
    return compute_class_weights(counts);
}

torch::Tensor category_weights_tensor(const ClassWeights& w) {
    // Index order matches the adapter logits (red, yellow, green).
    return torch::tensor({w.red, w.yellow, w.green}, torch::kFloat32);
}

// Shared epoch loop. `batch_loss` maps (inputs, samples) to a scalar loss.
using BatchLoss = std::function<torch::Tensor(const torch::Tensor&, const std::vector<const Prepared*>&)>;

PoseTrainResult run_training(PoseScorer& scorer, std::span<const PoseSample> train_samples,
                             std::span<const PoseSample> val_samples, const PoseTrainConfig& config,
                             torch::optim::Optimizer& optimizer, const BatchLoss& batch_loss,
                             const std::function<void(std::size_t)>& before_step,
                             const std::function<void(const PoseEpochLog&)>& on_epoch, ClassWeights weights) {
    const auto size = scorer.config().input_size();
    auto train = prepare(train_samples, size);
    auto val = prepare(val_samples, size);
    std::mt19937_64 rng(config.seed);
    auto& module = scorer.module();

    auto eval_loss = [&](const std::vector<Prepared>& set) {
        torch::NoGradGuard no_grad;
        module.eval();
        double total = 0.0;
        for (std::size_t start = 0; start < set.size(); start += 64) {
            const auto end = std::min(set.size(), start + 64);
            std::vector<torch::Tensor> xs;
            std::vector<const Prepared*> ps;
            for (std::size_t i = start; i < end; ++i) {
                xs.push_back(scorer.make_input(set[i].frame, set[i].landmarks));
                ps.push_back(&set[i]);
            }
            total += batch_loss(torch::stack(xs), ps).item<double>() * static_cast<double>(end - start);
        }
        return total / static_cast<double>(set.size());
    };

    PoseTrainResult result;
    result.weights = weights;
    TrailingMeanSelector selector(config.selection_window);
    std::vector<torch::Tensor> best;
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    const auto batch_size = static_cast<std::size_t>(std::max(1, config.batch_size));
    std::size_t step = 0;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        module.train();
        double sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += batch_size) {
            const auto end = std::min(order.size(), start + batch_size);
            std::vector<torch::Tensor> xs;
            std::vector<const Prepared*> ps;
            for (std::size_t k = start; k < end; ++k) {
                const auto& p = train[order[k]];
                xs.push_back(sample_input(scorer, p, config.augment, config.ranges, rng));
                ps.push_back(&p);
            }
            if (before_step) before_step(step);
            optimizer.zero_grad();
            auto loss = batch_loss(torch::stack(xs), ps);
            const double value = loss.item<double>();
            if (!std::isfinite(value)) {
                throw NumericError("pose loss diverged at epoch " + std::to_string(epoch));
            }
            loss.backward();
            optimizer.step();
            sum += value;
            ++batches;
            ++step;
        }
        PoseEpochLog log;
        log.epoch = epoch;
        log.train_loss = sum / static_cast<double>(std::max<std::size_t>(1, batches));
        log.val_loss = val.empty() ? eval_loss(train) : eval_loss(val);
        log.selected = selector.observe(log.val_loss);
        if (log.selected) best = nn::snapshot_state(module);
        result.epochs.push_back(log);
        if (on_epoch) on_epoch(log);
    }
    if (!best.empty()) nn::restore_state(module, best);
    result.selection = selector.result();
    module.eval();
    return result;
}

}  // namespace

PoseTrainResult train_pose_regressor(PoseScorer& scorer, std::span<const PoseSample> train,
                                     std::span<const PoseSample> val, const PoseTrainConfig& config,
                                     const std::function<void(const PoseEpochLog&)>& on_epoch) {
    if (scorer.config().architecture != Architecture::regression) throw PreconditionError("scorer is not a regressor");
    if (train.empty()) throw PreconditionError("empty pose training set");
    if (config.epochs < 1) throw PreconditionError("at least one epoch required");
    nn::set_deterministic(config.seed);
    const auto weights = weights_for(train);
    auto& net = scorer.regressor();
    torch::optim::Adam optimizer(net->parameters(), torch::optim::AdamOptions(config.learning_rate));
    auto loss = [&](const torch::Tensor& x, const std::vector<const Prepared*>& ps) {
        std::vector<float> target, w;
        for (const auto* p : ps) {
            target.push_back(static_cast<float>(p->score));
            w.push_back(static_cast<float>(weights[p->category]));
        }
        auto pred = net->forward(x);
        return (torch::tensor(w) * (pred - torch::tensor(target)).pow(2)).mean();
    };
    return run_training(scorer, train, val, config, optimizer, loss, {}, on_epoch, weights);
}

PoseTrainResult train_adapter_scorer(PoseScorer& scorer, std::span<const PoseSample> train,
                                     std::span<const PoseSample> val, const PoseTrainConfig& config,
                                     const std::function<void(const PoseEpochLog&)>& on_epoch) {
    if (scorer.config().architecture != Architecture::adapter) throw PreconditionError("scorer is not an adapter");
    if (train.empty()) throw PreconditionError("empty pose training set");
    if (config.epochs < 1) throw PreconditionError("at least one epoch required");
    nn::set_deterministic(config.seed);
    const auto weights = weights_for(train);
    auto& net = scorer.adapter();
    const auto before = scorer.backbone_digest();

    torch::optim::AdamW optimizer(net->trainable_parameters(),
                                  torch::optim::AdamWOptions(config.lr_min).weight_decay(config.weight_decay));
    const auto batch_size = static_cast<std::size_t>(std::max(1, config.batch_size));
    const auto steps_per_epoch = (train.size() + batch_size - 1) / batch_size;
    const auto half_cycle = config.half_cycle_steps > 0 ? static_cast<std::size_t>(config.half_cycle_steps)
                                                        : steps_per_epoch;
    auto set_lr = [&](std::size_t step) {
        const double lr = triangular_lr(step, half_cycle, config.lr_min, config.lr_max);
        for (auto& group : optimizer.param_groups()) static_cast<torch::optim::AdamWOptions&>(group.options()).lr(lr);
    };
    const auto class_w = category_weights_tensor(weights);
    auto loss = [&](const torch::Tensor& x, const std::vector<const Prepared*>& ps) {
        std::vector<std::int64_t> labels;
        for (const auto* p : ps) labels.push_back(static_cast<std::int64_t>(index_of(p->category)));
        return torch::nn::functional::cross_entropy(
            net->forward(x), torch::tensor(labels, torch::kInt64),
            torch::nn::functional::CrossEntropyFuncOptions().weight(class_w));
    };
    auto result = run_training(scorer, train, val, config, optimizer, loss, set_lr, on_epoch, weights);
    const auto after = scorer.backbone_digest();
    result.backbone_digest_before = before;
    result.backbone_digest_after = after;
    if (before != after) throw InvariantViolation("language backbone parameters changed during adapter training");
    return result;
}

PoseTrainResult train_pose_scorer(PoseScorer& scorer, std::span<const PoseSample> train,
                                  std::span<const PoseSample> val, const PoseTrainConfig& config,
                                  const std::function<void(const PoseEpochLog&)>& on_epoch) {
    return scorer.config().architecture == Architecture::regression
               ? train_pose_regressor(scorer, train, val, config, on_epoch)
               : train_adapter_scorer(scorer, train, val, config, on_epoch);
}

FoldResult evaluate_pose_fold(PoseScorer& scorer, std::span<const PoseSample> test, int fold_index) {
    if (test.empty()) throw PreconditionError("empty pose test set");
    std::vector<PoseCategory> truth, predicted;
    for (std::size_t start = 0; start < test.size(); start += 64) {
        const auto end = std::min(test.size(), start + 64);
        std::vector<torch::Tensor> xs;
        for (std::size_t i = start; i < end; ++i) {
            xs.push_back(scorer.make_input(test[i].frame, test[i].landmarks));
            truth.push_back(test[i].category);
        }
        for (const auto& o : scorer.score_batch(torch::stack(xs))) predicted.push_back(o.category);
    }
    return evaluate_categories(fold_index, truth, predicted);
}

}  // namespace echoguide::pose
