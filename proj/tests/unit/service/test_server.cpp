// Copyright (C) 2026 The EchoGuide Authors
// SPDX-License-Identifier: Apache-2.0

#include "../nn/torch_doctest.hpp"
#include "echoguide/error.hpp"
#include "echoguide/service/server.hpp"
#include "tiny_cascade.hpp"

using namespace echoguide;
using namespace echoguide::service;
using nlohmann::json;

TEST_SUITE("service.server") {

TEST_CASE("loopback in lockstep returns every frame in order") {
    ServiceConfig config;
    config.models = [] { return testing::tiny_cascade(8); };
    StreamServer server(config);
    const auto port = server.start("127.0.0.1", 0);
    CHECK(port != 0);

    auto frames = testing::tiny_fixture(15, 9);
    StreamClient client;
    client.connect("127.0.0.1", port);
    for (std::size_t i = 0; i < frames.size(); ++i) {
        client.send(testing::frame_message("loop", i, frames[i]));
        auto r = client.receive();
        REQUIRE(r.at("type") == "result");
        CHECK(r.at("frame_index") == i);
        CHECK(r.at("dropped_count") == 0);
    }
    client.send(R"({"type":"hello"})");
    CHECK(client.receive().at("code") == "unknown_type");
    client.send(R"({"type":"close"})");
    CHECK_THROWS_AS(client.receive(), SessionError);
    server.stop();
}

TEST_CASE("two clients get independent sessions") {
    ServiceConfig config;
    config.models = [] { return testing::tiny_cascade(8); };
    config.queue_all = true;
    StreamServer server(config);
    const auto port = server.start("127.0.0.1", 0);
    auto frames = testing::tiny_fixture(3, 1);
    StreamClient a, b;
    a.connect("127.0.0.1", port);
    b.connect("127.0.0.1", port);
    for (std::size_t i = 0; i < frames.size(); ++i) {
        a.send(testing::frame_message("same", i, frames[i]));
        b.send(testing::frame_message("same", i, frames[i]));
    }
    for (std::size_t i = 0; i < frames.size(); ++i) {
        auto ra = a.receive();
        auto rb = b.receive();
        CHECK(ra.at("frame_index") == i);
        CHECK(testing::without_latency(ra) == testing::without_latency(rb));
    }
    a.close();
    b.close();
    server.stop();
}

TEST_CASE("stop with connected clients returns") {
    ServiceConfig config;
    config.models = [] { return testing::tiny_cascade(8); };
    StreamServer server(config);
    const auto port = server.start("127.0.0.1", 0);
    StreamClient client;
    client.connect("127.0.0.1", port);
    server.stop();
    CHECK_THROWS_AS(client.receive(), SessionError);
}

}
