// Copyright (C) 2026 The EchoGuide Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <boost/asio/executor_work_guard.hpp>
#include <boost/asio/io_context.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/websocket.hpp>
#include <nlohmann/json.hpp>

#include "echoguide/service/protocol.hpp"

namespace echoguide::service {

/// WebSocket front end. Socket I/O runs on one thread; each connection gets a
/// worker thread that drains its InboundQueue through a ProtocolHandler.
class StreamServer {
public:
    explicit StreamServer(ServiceConfig config);
    ~StreamServer();

    StreamServer(const StreamServer&) = delete;
    StreamServer& operator=(const StreamServer&) = delete;

    /// Binds and starts accepting. Port 0 picks a free port; returns the bound one.
    unsigned short start(const std::string& address, unsigned short port);
    /// Closes the listener and all connections, then joins every thread.
    void stop();

    class Connection;

private:
    void accept_next();

    ServiceConfig config_;
    boost::asio::io_context ioc_;
    boost::asio::executor_work_guard<boost::asio::io_context::executor_type> work_;
    boost::asio::ip::tcp::acceptor acceptor_;
    std::thread io_thread_;
    std::mutex mutex_;
    std::vector<std::shared_ptr<Connection>> connections_;
    bool running_ = false;
};

/// Blocking client used by the tools and tests.
class StreamClient {
public:
    StreamClient();
    ~StreamClient();

    void connect(const std::string& host, unsigned short port);
    void send(const std::string& text);
    void send(const char* text) { send(std::string(text)); }
    void send(const nlohmann::json& message) { send(message.dump()); }
    /// Next server message; throws SessionError once the server has closed.
    nlohmann::json receive();
    void close();

private:
    boost::asio::io_context ioc_;
    boost::beast::websocket::stream<boost::asio::ip::tcp::socket> ws_;
    bool open_ = false;
};

}  // namespace echoguide::service
