// Copyright (C) 2026 The EchoGuide Authors
// SPDX-License-Identifier: Apache-2.0

#include "echoguide/service/server.hpp"

#include <deque>
#include <future>

#include <boost/asio/post.hpp>
#include <boost/beast/core.hpp>

#include "echoguide/error.hpp"

namespace echoguide::service {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;
using nlohmann::json;

class StreamServer::Connection : public std::enable_shared_from_this<Connection> {
public:
    Connection(tcp::socket socket, const ServiceConfig& config)
        : ws_(std::move(socket)),
          queue_(config.queue_all),
          handler_(config, [this](const json& j) { deliver(j.dump()); }) {}

    void start() {
        ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
            if (ec) return self->queue_.close();
            self->worker_ = std::thread([self] { self->work(); });
            self->read_next();
        });
    }

    /// Closes the socket; queued messages are still processed. Runs on the io thread.
    void shutdown() {
        beast::error_code ec;
        ws_.next_layer().shutdown(tcp::socket::shutdown_both, ec);
        ws_.next_layer().close(ec);
        queue_.close();
    }

    void join() {
        if (worker_.joinable()) worker_.join();
    }

private:
    void read_next() {
        ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) return self->queue_.close();
            self->queue_.push(beast::buffers_to_string(self->buffer_.data()));
            self->buffer_.consume(self->buffer_.size());
            self->read_next();
        });
    }

    void work() {
        while (auto item = queue_.pop()) {
            handler_.handle(item->text, item->dropped);
            if (handler_.connection_closed()) {
                queue_.close();
                net::post(ws_.get_executor(), [self = shared_from_this()] {
                    self->closing_ = true;
                    if (!self->writing_) self->close_socket();
                });
                break;
            }
        }
    }

    void deliver(std::string text) {
        net::post(ws_.get_executor(), [self = shared_from_this(), text = std::move(text)]() mutable {
            self->outbox_.push_back(std::move(text));
            if (!self->writing_) self->write_next();
        });
    }

    void write_next() {
        if (outbox_.empty()) {
            writing_ = false;
            if (closing_) close_socket();
            return;
        }
        writing_ = true;
        ws_.text(true);
        ws_.async_write(net::buffer(outbox_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
            self->outbox_.pop_front();
            if (ec) {
                self->outbox_.clear();
                self->writing_ = false;
                return;
            }
            self->write_next();
        });
    }

    void close_socket() {
        ws_.async_close(websocket::close_code::normal, [self = shared_from_this()](beast::error_code) {});
    }

    websocket::stream<tcp::socket> ws_;
    beast::flat_buffer buffer_;
    InboundQueue queue_;
    ProtocolHandler handler_;
    std::deque<std::string> outbox_;
    bool writing_ = false;
    bool closing_ = false;
    std::thread worker_;
};

StreamServer::StreamServer(ServiceConfig config)
    : config_(std::move(config)), work_(net::make_work_guard(ioc_)), acceptor_(ioc_) {}

StreamServer::~StreamServer() { stop(); }

unsigned short StreamServer::start(const std::string& address, unsigned short port) {
    if (running_) throw SessionError("server already started");
    const tcp::endpoint endpoint(net::ip::make_address(address), port);
    acceptor_.open(endpoint.protocol());
    acceptor_.set_option(net::socket_base::reuse_address(true));
    acceptor_.bind(endpoint);
    acceptor_.listen();
    running_ = true;
    accept_next();
    io_thread_ = std::thread([this] { ioc_.run(); });
    return acceptor_.local_endpoint().port();
}

void StreamServer::accept_next() {
    acceptor_.async_accept([this](beast::error_code ec, tcp::socket socket) {
        if (ec) return;
        auto conn = std::make_shared<Connection>(std::move(socket), config_);
        {
            std::lock_guard lock(mutex_);
            connections_.push_back(conn);
        }
        conn->start();
        accept_next();
    });
}

void StreamServer::stop() {
    if (!running_) return;
    running_ = false;
    std::vector<std::shared_ptr<Connection>> conns;
    std::promise<void> closed;
    net::post(ioc_, [&] {
        beast::error_code ec;
        acceptor_.close(ec);
        {
            std::lock_guard lock(mutex_);
            conns.swap(connections_);
        }
        for (auto& c : conns) c->shutdown();
        closed.set_value();
    });
    closed.get_future().wait();
    for (auto& c : conns) c->join();
    work_.reset();
    ioc_.stop();
    if (io_thread_.joinable()) io_thread_.join();
}

StreamClient::StreamClient() : ws_(ioc_) {}

StreamClient::~StreamClient() {
    try {
        close();
    } catch (const std::exception&) {
        // Best effort on teardown.
    }
}

void StreamClient::connect(const std::string& host, unsigned short port) {
    tcp::resolver resolver(ioc_);
    net::connect(ws_.next_layer(), resolver.resolve(host, std::to_string(port)));
    ws_.handshake(host + ":" + std::to_string(port), "/");
    ws_.text(true);
    open_ = true;
}

void StreamClient::send(const std::string& text) {
    if (!open_) throw SessionError("client is not connected");
    ws_.write(net::buffer(text));
}

json StreamClient::receive() {
    if (!open_) throw SessionError("client is not connected");
    beast::flat_buffer buffer;
    beast::error_code ec;
    ws_.read(buffer, ec);
    if (ec) {
        open_ = false;
        throw SessionError("connection closed: " + ec.message());
    }
    return json::parse(beast::buffers_to_string(buffer.data()));
}

void StreamClient::close() {
    if (!open_) return;
    open_ = false;
    beast::error_code ec;
    ws_.close(websocket::close_code::normal, ec);
}

}  // namespace echoguide::service
