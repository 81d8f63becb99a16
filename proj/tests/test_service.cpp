#include <doctest.h>

#include <cstdlib>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "impress/http_clients.hpp"
#include "impress/service.hpp"
#include "support/toy_world.hpp"

using namespace impress;

namespace {

/// In-process HTTP server on a loopback port picked by the OS.
struct TestServer {
    httplib::Server server;
    int port = 0;
    std::thread runner;

    void start() {
        port = server.bind_to_any_port("127.0.0.1");
        REQUIRE(port > 0);
        runner = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }

    ~TestServer() {
        server.stop();
        if (runner.joinable()) runner.join();
    }

    std::string url(const std::string& path) const {
        return "http://127.0.0.1:" + std::to_string(port) + path;
    }
};

}  // namespace

TEST_CASE("endpoint urls split into base and path") {
    auto chat = detail::split_url("http://llm.local:8000/v1/chat/completions");
    CHECK(chat.base == "http://llm.local:8000");
    CHECK(chat.path == "/v1/chat/completions");

    auto bare = detail::split_url("https://llm.local");
    CHECK(bare.base == "https://llm.local");
    CHECK(bare.path == "/");

    CHECK_THROWS_AS(detail::split_url("llm.local/v1"), ConfigError);
}

TEST_CASE("trace ids hash the conversation against the fingerprint") {
    std::string id = make_trace_id("conv-1", "0011223344556677");
    CHECK(id.size() == 16);
    CHECK(id.find_first_not_of("0123456789abcdef") == std::string::npos);
    CHECK(id == make_trace_id("conv-1", "0011223344556677"));
    CHECK(id != make_trace_id("conv-2", "0011223344556677"));
    CHECK(id != make_trace_id("conv-1", "ffeeddccbbaa9988"));
}

TEST_CASE("recommend responses carry diagnosis, ranking, and overhead") {
    toy::World world = toy::make_world();
    auto pipeline = world.make_pipeline();
    RecommendResult result = pipeline->recommend(world.dataset[0].conversation);

    nlohmann::json response = recommend_response_json(*world.store, result, "abcd");
    CHECK(response["diagnosis"]["summary"] == result.diagnosis.summary);
    CHECK(response["diagnosis"]["diagnosis"] == result.diagnosis.diagnosis);
    CHECK(response["trace_id"] == "abcd");

    const auto& ranked = response["ranked"];
    REQUIRE(ranked.size() == result.ranking.ordered_spcs.size());
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        const auto& scored = result.ranking.ordered_spcs[i];
        CHECK(ranked[i]["spc_id"] == scored.spc_id);
        CHECK(ranked[i]["display_name"] == world.store->display_name(scored.spc_id));
        CHECK(ranked[i]["score"] == scored.borda_score);
        CHECK(ranked[i]["best_distance"] == doctest::Approx(scored.best_distance));
    }
    CHECK(ranked[0]["spc_id"] == "disk-cleaner");

    const TokenUsage usage = result.total_usage();
    CHECK(response["overhead"]["tokens"]["prompt"] == usage.prompt_tokens);
    CHECK(response["overhead"]["tokens"]["completion"] == usage.completion_tokens);
    CHECK(response["overhead"]["tokens"]["total"] == usage.total());
    CHECK(response["overhead"]["ms"] == result.total_ms());
}

TEST_CASE("the service answers health and recommend") {
    // Two identical worlds: the direct run and the service run each consume a
    // fresh script pass, so their responses must match exactly.
    toy::World reference = toy::make_world();
    RecommendResult direct =
        reference.make_pipeline()->recommend(reference.dataset[0].conversation);

    toy::World world = toy::make_world();
    std::shared_ptr<const Pipeline> pipeline = world.make_pipeline();
    RecommendService service(pipeline, ServiceOptions{});

    nlohmann::json health = service.handle_health();
    CHECK(health["status"] == "ok");
    CHECK(health["fingerprint"] == pipeline->fingerprint());

    const Conversation& conv = world.dataset[0].conversation;
    nlohmann::json expected =
        recommend_response_json(*world.store, direct, service.trace_id(conv.conversation_id));

    auto [status, body] = service.handle_recommend(conversation_to_json(conv).dump());
    CHECK(status == 200);
    CHECK(body == expected);
    CHECK(body["ranked"][0]["spc_id"] == "disk-cleaner");
}

TEST_CASE("bad request bodies map to 400 and 422") {
    toy::World world = toy::make_world();
    RecommendService service(world.make_pipeline(), ServiceOptions{});

    auto [bad_json, body1] = service.handle_recommend("{nope");
    CHECK(bad_json == 400);
    CHECK(body1["error"].get<std::string>().find("malformed JSON body") != std::string::npos);

    auto [no_utterances, body2] =
        service.handle_recommend(nlohmann::json{{"conversation_id", "x"}}.dump());
    CHECK(no_utterances == 422);
    CHECK_FALSE(body2["error"].get<std::string>().empty());

    auto [bad_role, body3] = service.handle_recommend(
        nlohmann::json{{"conversation_id", "x"},
                       {"utterances", {{{"role", "wizard"}, {"text", "hi"}}}}}
            .dump());
    CHECK(bad_role == 422);
    CHECK(world.chat->calls(kStep1DiagnosisTag) == 0);  // rejected before any model call
}

TEST_CASE("pipeline failures map to 502") {
    toy::World world = toy::make_world();
    world.chat->script(kStep1DiagnosisTag,
                       {ScriptStep::reply("junk"), ScriptStep::reply("junk")});
    RecommendService service(world.make_pipeline(), ServiceOptions{});

    auto [status, body] = service.handle_recommend(
        conversation_to_json(world.dataset[0].conversation).dump());
    CHECK(status == 502);
    CHECK(body["error"].get<std::string>().find("step1-diagnosis") != std::string::npos);
}

TEST_CASE("slow pipelines map to 504") {
    toy::World world = toy::make_world(0);
    world.chat->script(kStep1DiagnosisTag,
                       {ScriptStep::reply("never used in time").with_delay(400)});
    ServiceOptions options;
    options.request_timeout_s = 0.05;
    RecommendService service(world.make_pipeline(), options);

    auto [status, body] = service.handle_recommend(
        conversation_to_json(world.dataset[0].conversation).dump());
    CHECK(status == 504);
    CHECK(body["error"] == "recommend timed out");
}

TEST_CASE("the service is reachable over a socket") {
    toy::World world = toy::make_world();
    RecommendService service(world.make_pipeline(), ServiceOptions{});

    TestServer ts;
    service.register_routes(ts.server);
    ts.start();

    httplib::Client client("127.0.0.1", ts.port);
    auto health = client.Get("/v1/health");
    REQUIRE(health);
    CHECK(health->status == 200);
    CHECK(nlohmann::json::parse(health->body)["fingerprint"] == service.fingerprint());

    auto ok = client.Post("/v1/recommend",
                          conversation_to_json(world.dataset[0].conversation).dump(),
                          "application/json");
    REQUIRE(ok);
    CHECK(ok->status == 200);
    CHECK(nlohmann::json::parse(ok->body)["ranked"][0]["spc_id"] == "disk-cleaner");

    auto bad = client.Post("/v1/recommend", "{nope", "application/json");
    REQUIRE(bad);
    CHECK(bad->status == 400);
}

TEST_CASE("a null pipeline is rejected") {
    CHECK_THROWS_AS(RecommendService(nullptr, ServiceOptions{}), std::invalid_argument);
}

TEST_CASE("the chat backend speaks the completions wire shape") {
    TestServer ts;
    nlohmann::json captured;
    std::string auth_header;
    ts.server.Post("/v1/chat/completions",
                   [&](const httplib::Request& req, httplib::Response& res) {
                       captured = nlohmann::json::parse(req.body);
                       auth_header = req.get_header_value("Authorization");
                       nlohmann::json reply = {
                           {"choices", {{{"message", {{"content", "hello from wire"}}}}}},
                           {"usage", {{"prompt_tokens", 12}, {"completion_tokens", 4}}}};
                       res.set_content(reply.dump(), "application/json");
                   });
    ts.start();

    setenv("IMPRESS_TEST_WIRE_KEY", "sekrit", 1);
    ModelConfig config{"wire-chat", 0.25, 77, ts.url("/v1/chat/completions"),
                       "IMPRESS_TEST_WIRE_KEY"};
    HttpChatBackend backend(5.0);
    ChatResult result = backend.complete(
        config, {system_message("be brief"), user_message("say hello")}, "tag");
    unsetenv("IMPRESS_TEST_WIRE_KEY");

    CHECK(result.text == "hello from wire");
    REQUIRE(result.usage.has_value());
    CHECK(result.usage->prompt_tokens == 12);
    CHECK(result.usage->completion_tokens == 4);
    CHECK(captured["model"] == "wire-chat");
    CHECK(captured["temperature"] == 0.25);
    CHECK(captured["max_tokens"] == 77);
    REQUIRE(captured["messages"].size() == 2);
    CHECK(captured["messages"][0]["role"] == "system");
    CHECK(captured["messages"][1]["content"] == "say hello");
    CHECK(auth_header == "Bearer sekrit");
}

TEST_CASE("the embed backend honors out-of-order indices") {
    TestServer ts;
    ts.server.Post("/v1/embeddings", [&](const httplib::Request&, httplib::Response& res) {
        nlohmann::json reply = {
            {"data",
             {{{"index", 1}, {"embedding", {0.5, 0.5}}}, {{"index", 0}, {"embedding", {1.0, 0.0}}}}},
            {"usage", {{"prompt_tokens", 9}, {"completion_tokens", 0}}}};
        res.set_content(reply.dump(), "application/json");
    });
    ts.start();

    ModelConfig config{"wire-embed", 0.0, 1024, ts.url("/v1/embeddings"), ""};
    HttpEmbedBackend backend(5.0);
    EmbedBatchResult result = backend.embed(config, {"first", "second"}, "tag");
    REQUIRE(result.vectors.size() == 2);
    CHECK(result.vectors[0] == std::vector<float>{1.0f, 0.0f});
    CHECK(result.vectors[1] == std::vector<float>{0.5f, 0.5f});
    REQUIRE(result.usage.has_value());
    CHECK(result.usage->prompt_tokens == 9);
}

TEST_CASE("the search client truncates results and wraps failures") {
    TestServer ts;
    nlohmann::json captured;
    ts.server.Post("/search", [&](const httplib::Request& req, httplib::Response& res) {
        captured = nlohmann::json::parse(req.body);
        nlohmann::json reply = {{"results",
                                 {{{"title", "t0"}, {"content", "c0"}, {"url", "u0"}},
                                  {{"title", "t1"}},
                                  {{"title", "t2"}, {"content", "c2"}}}}};
        res.set_content(reply.dump(), "application/json");
    });
    ts.server.Post("/broken", [](const httplib::Request&, httplib::Response& res) {
        res.status = 500;
    });
    ts.start();

    HttpSearchClient client(ts.url("/search"), "", 5.0);
    auto results = client.search("vpn features", 2);
    CHECK(captured["query"] == "vpn features");
    CHECK(captured["max_results"] == 2);
    REQUIRE(results.size() == 2);
    CHECK(results[0].title == "t0");
    CHECK(results[0].url == "u0");
    CHECK(results[1].content == "");  // absent fields default empty

    HttpSearchClient broken(ts.url("/broken"), "", 5.0);
    CHECK_THROWS_AS(broken.search("anything", 1), SearchTransportError);
}

TEST_CASE("http statuses map to typed errors") {
    TestServer ts;
    ts.server.Post("/auth", [](const httplib::Request&, httplib::Response& res) {
        res.status = 401;
    });
    ts.server.Post("/busted", [](const httplib::Request&, httplib::Response& res) {
        res.status = 503;
    });
    ts.server.Post("/teapot", [](const httplib::Request&, httplib::Response& res) {
        res.status = 418;
        res.set_content("short and stout", "text/plain");
    });
    ts.server.Post("/garbage", [](const httplib::Request&, httplib::Response& res) {
        res.set_content("not json at all", "text/plain");
    });
    ts.start();

    HttpChatBackend backend(2.0);
    auto call = [&](const std::string& path) {
        ModelConfig config{"m", 0.0, 16, ts.url(path), ""};
        return backend.complete(config, {user_message("hi")}, "tag");
    };
    CHECK_THROWS_AS(call("/auth"), AuthError);
    CHECK_THROWS_AS(call("/busted"), TransportError);
    CHECK_THROWS_AS(call("/teapot"), BackendRefusal);
    CHECK_THROWS_AS(call("/garbage"), TransportError);

    ModelConfig unreachable{"m", 0.0, 16, "http://127.0.0.1:1/v1", ""};
    CHECK_THROWS_AS(backend.complete(unreachable, {user_message("hi")}, "tag"), TransportError);
}
