// Copyright (C) 2026 The EchoGuide Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <condition_variable>
#include <cstddef>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "echoguide/pipeline/session.hpp"

// Transport-independent half of the streaming service: message validation,
// per-session cascades and the latest-frame-wins inbound queue.
namespace echoguide::service {

enum class ErrorCode { malformed, out_of_order, session_not_found, unknown_type, shape, internal };

std::string_view to_string(ErrorCode code);

/// {type:"error", code, detail} plus session_id / frame_index when known.
nlohmann::json error_message(ErrorCode code, const std::string& detail,
                             const std::optional<std::string>& session_id = {},
                             const std::optional<std::size_t>& frame_index = {});

using ModelFactory = std::function<pipeline::CascadeModels()>;

/// Loads a fresh set of handles from disk on every call.
ModelFactory checkpoint_factory(const pipeline::CheckpointPaths& paths);

struct ServiceConfig {
    ModelFactory models;
    double fps = 30.0;  // live sessions; playback uses the sweep's rate
    std::size_t buffer_capacity = 32;
    bool resize_frames = false;
    /// Process every frame instead of dropping superseded ones.
    bool queue_all = false;
    /// Append-only JSON-lines result log per session when set.
    std::optional<std::filesystem::path> log_dir;
};

/// Protocol state for one connection. Emits replies through `emit`.
class ProtocolHandler {
public:
    using Emit = std::function<void(const nlohmann::json&)>;

    ProtocolHandler(const ServiceConfig& config, Emit emit);

    /// Handles one client message. `dropped` counts superseded frames of the
    /// same session that were discarded in favour of this one.
    void handle(const std::string& text, std::size_t dropped = 0);

    /// True after a close message without a session id.
    bool connection_closed() const { return connection_closed_; }

private:
    struct SessionState {
        std::unique_ptr<pipeline::Session> session;
        std::optional<std::size_t> last_index;
    };

    void handle_frame(const nlohmann::json& msg, std::size_t dropped);
    void handle_playback(const nlohmann::json& msg);
    void handle_close(const nlohmann::json& msg);
    SessionState& open_session(const std::string& id, double fps);
    void log_result(const std::string& session_id, const nlohmann::json& result);

    const ServiceConfig& config_;
    Emit emit_;
    std::map<std::string, SessionState> sessions_;
    std::set<std::string> retired_;
    std::size_t playback_counter_ = 0;
    bool connection_closed_ = false;
};

/// FIFO of raw client messages. Unless `queue_all`, a frame replaces a still
/// queued frame of the same session when no control message sits between
/// them; the replacement inherits and increments the drop count.
class InboundQueue {
public:
    struct Item {
        std::string text;
        std::size_t dropped = 0;
    };

    explicit InboundQueue(bool queue_all) : queue_all_(queue_all) {}

    void push(std::string text);
    /// Blocks until an item is available; empty once closed and drained.
    std::optional<Item> pop();
    void close();

private:
    struct Entry {
        Item item;
        std::optional<std::string> frame_session;
    };

    bool queue_all_;
    std::mutex mutex_;
    std::condition_variable ready_;
    std::deque<Entry> entries_;
    bool closed_ = false;
};

}  // namespace echoguide::service
