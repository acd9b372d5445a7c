// Copyright (C) 2026 The EchoGuide Authors
// SPDX-License-Identifier: Apache-2.0

#include "echoguide/service/protocol.hpp"

#include <fstream>

#include "echoguide/error.hpp"
#include "echoguide/ingest.hpp"
#include "echoguide/video_io.hpp"

namespace echoguide::service {

using nlohmann::json;

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::malformed: return "malformed";
        case ErrorCode::out_of_order: return "out_of_order";
        case ErrorCode::session_not_found: return "session_not_found";
        case ErrorCode::unknown_type: return "unknown_type";
        case ErrorCode::shape: return "shape";
        case ErrorCode::internal: return "internal";
    }
    return "internal";
}

json error_message(ErrorCode code, const std::string& detail, const std::optional<std::string>& session_id,
                   const std::optional<std::size_t>& frame_index) {
    json j = {{"type", "error"}, {"code", std::string(to_string(code))}, {"detail", detail}};
    if (session_id) j["session_id"] = *session_id;
    if (frame_index) j["frame_index"] = *frame_index;
    return j;
}

ModelFactory checkpoint_factory(const pipeline::CheckpointPaths& paths) {
    return [paths] { return pipeline::CascadeModels::load(paths); };
}

ProtocolHandler::ProtocolHandler(const ServiceConfig& config, Emit emit) : config_(config), emit_(std::move(emit)) {}

namespace {

// Thrown for protocol-level rejections that carry their own error code.
struct Rejection {
    ErrorCode code;
    std::string detail;
};

std::string require_string(const json& msg, const char* key) {
    auto it = msg.find(key);
    if (it == msg.end() || !it->is_string()) throw Rejection{ErrorCode::malformed, std::string("missing string field ") + key};
    return it->get<std::string>();
}

std::string sanitize(const std::string& id) {
    std::string out = id;
    for (auto& ch : out) {
        if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' && ch != '_' && ch != '.') ch = '_';
    }
    return out;
}

}  // namespace

void ProtocolHandler::handle(const std::string& text, std::size_t dropped) {
    std::optional<std::string> session_id;
    std::optional<std::size_t> frame_index;
    try {
        json msg;
        try {
            msg = json::parse(text);
        } catch (const json::exception& e) {
            throw Rejection{ErrorCode::malformed, std::string("invalid JSON: ") + e.what()};
        }
        if (!msg.is_object()) throw Rejection{ErrorCode::malformed, "message must be a JSON object"};
        const auto type = require_string(msg, "type");
        if (auto it = msg.find("session_id"); it != msg.end() && it->is_string()) session_id = it->get<std::string>();
        if (auto it = msg.find("frame_index"); it != msg.end() && it->is_number_unsigned()) {
            frame_index = it->get<std::size_t>();
        }
        if (type == "frame") {
            handle_frame(msg, dropped);
        } else if (type == "open_playback") {
            handle_playback(msg);
        } else if (type == "close") {
            handle_close(msg);
        } else {
            throw Rejection{ErrorCode::unknown_type, "unknown message type '" + type + "'"};
        }
    } catch (const Rejection& r) {
        emit_(error_message(r.code, r.detail, session_id, frame_index));
    } catch (const ShapeError& e) {
        emit_(error_message(ErrorCode::shape, e.what(), session_id, frame_index));
    } catch (const ParseError& e) {
        emit_(error_message(ErrorCode::malformed, e.what(), session_id, frame_index));
    } catch (const std::exception& e) {
        emit_(error_message(ErrorCode::internal, e.what(), session_id, frame_index));
    }
}

ProtocolHandler::SessionState& ProtocolHandler::open_session(const std::string& id, double fps) {
    pipeline::SessionOptions options;
    options.session_id = id;
    options.fps = fps;
    options.buffer_capacity = config_.buffer_capacity;
    options.resize_frames = config_.resize_frames;
    if (!config_.models) throw SessionError("service has no model factory");
    auto& state = sessions_[id];
    state.session = std::make_unique<pipeline::Session>(config_.models(), options);
    return state;
}

void ProtocolHandler::handle_frame(const json& msg, std::size_t dropped) {
    const auto id = require_string(msg, "session_id");
    if (id.empty()) throw Rejection{ErrorCode::malformed, "session_id must not be empty"};
    auto idx = msg.find("frame_index");
    if (idx == msg.end() || !idx->is_number_unsigned()) {
        throw Rejection{ErrorCode::malformed, "frame_index must be a non-negative integer"};
    }
    auto ts = msg.find("timestamp_ms");
    if (ts == msg.end() || !ts->is_number()) throw Rejection{ErrorCode::malformed, "timestamp_ms must be a number"};
    const auto image_b64 = require_string(msg, "image_b64");
    const auto frame_index = idx->get<std::size_t>();

    if (retired_.count(id) != 0) throw Rejection{ErrorCode::session_not_found, "session " + id + " is closed"};
    auto it = sessions_.find(id);
    SessionState& state = it != sessions_.end() ? it->second : open_session(id, config_.fps);
    if (state.last_index && frame_index <= *state.last_index) {
        throw Rejection{ErrorCode::out_of_order, "frame_index " + std::to_string(frame_index) +
                                                     " does not follow " + std::to_string(*state.last_index)};
    }
    const auto bytes = video::base64_decode(image_b64);
    const cv::Mat image = video::decode_png(bytes);

    auto result = state.session->process_frame(image, frame_index);
    result.dropped_count = dropped;
    state.last_index = frame_index;
    auto out = pipeline::result_to_json(result);
    out["session_id"] = id;
    log_result(id, out);
    emit_(out);
}

void ProtocolHandler::handle_playback(const json& msg) {
    const std::filesystem::path path = require_string(msg, "sweep_path");
    std::vector<cv::Mat> frames;
    std::vector<PoseCategory> truth;
    double fps = config_.fps;
    if (path.extension() == ".json") {
        auto sweeps = ingest::parse_sweep_manifest(path);
        const auto wanted = msg.value("sweep_id", std::string{});
        auto chosen = std::find_if(sweeps.begin(), sweeps.end(),
                                   [&](const auto& s) { return wanted.empty() || s.sweep_id == wanted; });
        if (chosen == sweeps.end()) throw Rejection{ErrorCode::malformed, "no matching sweep in " + path.string()};
        frames = std::move(chosen->frames);
        truth = chosen->frame_categories;
        fps = chosen->fps;
    } else {
        if (!std::filesystem::exists(path)) throw Rejection{ErrorCode::malformed, "no such sweep " + path.string()};
        frames = video::read_frames(path);
        fps = msg.value("fps", config_.fps);
    }
    if (frames.empty()) throw Rejection{ErrorCode::malformed, "sweep " + path.string() + " has no frames"};

    std::string id = msg.value("session_id", std::string{});
    if (id.empty()) id = "playback-" + std::to_string(++playback_counter_);
    if (sessions_.count(id) != 0 || retired_.count(id) != 0) {
        throw Rejection{ErrorCode::malformed, "session " + id + " already exists"};
    }
    auto& state = open_session(id, fps);
    for (std::size_t i = 0; i < frames.size(); ++i) {
        auto result = state.session->process_frame(frames[i], i);
        state.last_index = i;
        auto out = pipeline::result_to_json(result);
        out["session_id"] = id;
        out["playback_length"] = frames.size();
        if (i < truth.size()) out["truth_category"] = std::string(to_string(truth[i]));
        log_result(id, out);
        out["image_b64"] = video::base64_encode(video::encode_png(frames[i]));
        emit_(out);
    }
    sessions_.erase(id);
    retired_.insert(id);
}

void ProtocolHandler::handle_close(const json& msg) {
    auto it = msg.find("session_id");
    if (it != msg.end() && it->is_string()) {
        const auto id = it->get<std::string>();
        if (sessions_.erase(id) == 0) throw Rejection{ErrorCode::session_not_found, "session " + id + " is not open"};
        retired_.insert(id);
        return;
    }
    for (const auto& [id, state] : sessions_) retired_.insert(id);
    sessions_.clear();
    connection_closed_ = true;
}

void ProtocolHandler::log_result(const std::string& session_id, const json& result) {
    if (!config_.log_dir) return;
    std::filesystem::create_directories(*config_.log_dir);
    std::ofstream out(*config_.log_dir / (sanitize(session_id) + ".jsonl"), std::ios::app);
    out << result.dump() << '\n';
}

void InboundQueue::push(std::string text) {
    std::optional<std::string> frame_session;
    try {
        auto j = json::parse(text);
        if (j.is_object() && j.value("type", "") == "frame" && j.contains("session_id") && j["session_id"].is_string()) {
            frame_session = j["session_id"].get<std::string>();
        }
    } catch (const json::exception&) {
        // Malformed text is queued as-is; the handler reports it.
    }
    std::lock_guard lock(mutex_);
    if (closed_) return;
    if (!queue_all_ && frame_session) {
        for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
            if (!it->frame_session) break;
            if (*it->frame_session == *frame_session) {
                it->item.text = std::move(text);
                ++it->item.dropped;
                return;
            }
        }
    }
    entries_.push_back({{std::move(text), 0}, std::move(frame_session)});
    ready_.notify_one();
}

std::optional<InboundQueue::Item> InboundQueue::pop() {
    std::unique_lock lock(mutex_);
    ready_.wait(lock, [this] { return closed_ || !entries_.empty(); });
    if (entries_.empty()) return std::nullopt;
    auto item = std::move(entries_.front().item);
    entries_.pop_front();
    return item;
}

void InboundQueue::close() {
    std::lock_guard lock(mutex_);
    closed_ = true;
    ready_.notify_all();
}

}  // namespace echoguide::service
