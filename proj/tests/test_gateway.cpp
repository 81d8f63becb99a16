#include <doctest.h>

#include <memory>
#include <string>
#include <vector>

#include "impress/errors.hpp"
#include "impress/llm.hpp"
#include "impress/mock_llm.hpp"

using namespace impress;

namespace {

ModelConfig test_config() {
    ModelConfig config;
    config.model_id = "test-model";
    config.endpoint = "http://mock.invalid/v1";
    return config;
}

RetryPolicy no_wait() {
    RetryPolicy policy;
    policy.base_delay_ms = 0;
    return policy;
}

Gateway make_gateway(std::shared_ptr<ScriptedChatBackend>& chat,
                     std::shared_ptr<HashEmbedBackend>& embed) {
    chat = std::make_shared<ScriptedChatBackend>();
    embed = std::make_shared<HashEmbedBackend>(8);
    return Gateway(chat, embed, no_wait());
}

}  // namespace

TEST_CASE("model config validation") {
    ModelConfig config = test_config();
    CHECK_NOTHROW(config.validate());

    ModelConfig no_model = config;
    no_model.model_id.clear();
    CHECK_THROWS_AS(no_model.validate(), ConfigError);

    ModelConfig no_endpoint = config;
    no_endpoint.endpoint.clear();
    CHECK_THROWS_AS(no_endpoint.validate(), ConfigError);

    ModelConfig bad_temp = config;
    bad_temp.temperature = 2.5;
    CHECK_THROWS_AS(bad_temp.validate(), ConfigError);

    ModelConfig bad_tokens = config;
    bad_tokens.max_output_tokens = 0;
    CHECK_THROWS_AS(bad_tokens.validate(), ConfigError);
}

TEST_CASE("chat replies pass through with usage and ledger accounting") {
    std::shared_ptr<ScriptedChatBackend> chat;
    std::shared_ptr<HashEmbedBackend> embed;
    Gateway gateway = make_gateway(chat, embed);
    chat->script("tag-a", {ScriptStep::reply("hello").with_usage(10, 5).with_latency(2.0)});

    ChatExchange exchange = gateway.complete_chat(test_config(), {user_message("hi")}, "tag-a");
    CHECK(exchange.response_text == "hello");
    CHECK(exchange.usage.prompt_tokens == 10);
    CHECK(exchange.usage.completion_tokens == 5);
    CHECK(exchange.latency_ms == 2.0);
    CHECK(exchange.attempts == 1);

    auto entries = gateway.snapshot_ledger();
    REQUIRE(entries.size() == 1);
    CHECK(entries[0].tag == "tag-a");
    CHECK(entries[0].call_count == 1);
    CHECK(entries[0].usage.prompt_tokens == 10);
    CHECK(entries[0].usage.completion_tokens == 5);
    CHECK(entries[0].latencies_ms == std::vector<double>{2.0});
}

TEST_CASE("usage is estimated when the backend reports none") {
    std::shared_ptr<ScriptedChatBackend> chat;
    std::shared_ptr<HashEmbedBackend> embed;
    Gateway gateway = make_gateway(chat, embed);
    chat->script("t", {ScriptStep::reply("four words in reply")});

    ChatExchange exchange =
        gateway.complete_chat(test_config(), {user_message("two words")}, "t");
    TokenUsage expected =
        detail::estimate_usage({user_message("two words")}, "four words in reply");
    CHECK(exchange.usage.prompt_tokens == expected.prompt_tokens);
    CHECK(exchange.usage.completion_tokens == expected.completion_tokens);
    CHECK(exchange.usage.prompt_tokens > 0);
    CHECK(exchange.usage.completion_tokens > 0);
}

TEST_CASE("transport failures retry up to the limit then surface") {
    std::shared_ptr<ScriptedChatBackend> chat;
    std::shared_ptr<HashEmbedBackend> embed;
    Gateway gateway = make_gateway(chat, embed);

    SUBCASE("recovers within budget") {
        chat->script("t", {ScriptStep::transport_fail(), ScriptStep::transport_fail(),
                           ScriptStep::reply("ok")});
        ChatExchange exchange = gateway.complete_chat(test_config(), {user_message("x")}, "t");
        CHECK(exchange.response_text == "ok");
        CHECK(exchange.attempts == 3);
        CHECK(chat->calls("t") == 3);
    }

    SUBCASE("throws after 1 + retry_limit attempts") {
        chat->script("t", {ScriptStep::transport_fail(), ScriptStep::transport_fail(),
                           ScriptStep::transport_fail(), ScriptStep::reply("late")});
        CHECK_THROWS_AS(gateway.complete_chat(test_config(), {user_message("x")}, "t"),
                        TransportError);
        CHECK(chat->calls("t") == 3);
    }
}

TEST_CASE("auth failures are never retried") {
    std::shared_ptr<ScriptedChatBackend> chat;
    std::shared_ptr<HashEmbedBackend> embed;
    Gateway gateway = make_gateway(chat, embed);
    chat->script("t", {ScriptStep::auth_fail(), ScriptStep::reply("never reached")});

    CHECK_THROWS_AS(gateway.complete_chat(test_config(), {user_message("x")}, "t"), AuthError);
    CHECK(chat->calls("t") == 1);
}

TEST_CASE("empty replies are retried then rejected as refusal") {
    std::shared_ptr<ScriptedChatBackend> chat;
    std::shared_ptr<HashEmbedBackend> embed;
    Gateway gateway = make_gateway(chat, embed);

    SUBCASE("eventually non-empty") {
        chat->script("t", {ScriptStep::empty(), ScriptStep::reply("ok")});
        ChatExchange exchange = gateway.complete_chat(test_config(), {user_message("x")}, "t");
        CHECK(exchange.response_text == "ok");
        CHECK(exchange.attempts == 2);
    }

    SUBCASE("exhausted budget") {
        chat->script("t", {ScriptStep::empty(), ScriptStep::empty(), ScriptStep::empty()});
        CHECK_THROWS_AS(gateway.complete_chat(test_config(), {user_message("x")}, "t"),
                        BackendRefusal);
        CHECK(chat->calls("t") == 3);
    }
}

TEST_CASE("chat input validation") {
    std::shared_ptr<ScriptedChatBackend> chat;
    std::shared_ptr<HashEmbedBackend> embed;
    Gateway gateway = make_gateway(chat, embed);

    CHECK_THROWS_AS(gateway.complete_chat(test_config(), {}, "t"), std::invalid_argument);
    CHECK_THROWS_AS(gateway.complete_chat(test_config(), {assistant_message("hi")}, "t"),
                    std::invalid_argument);
}

TEST_CASE("embedding batches keep order and record one ledger entry") {
    std::shared_ptr<ScriptedChatBackend> chat;
    std::shared_ptr<HashEmbedBackend> embed;
    Gateway gateway = make_gateway(chat, embed);

    std::vector<std::string> texts = {"alpha", "beta", "gamma"};
    auto results = gateway.embed_texts(test_config(), texts, "embed-tag");
    REQUIRE(results.size() == 3);
    for (std::size_t i = 0; i < texts.size(); ++i) {
        CHECK(results[i].dimension == 8);
        CHECK(results[i].vector == HashEmbedBackend::hash_vector(texts[i], 8));
    }

    auto entries = gateway.snapshot_ledger();
    REQUIRE(entries.size() == 1);
    CHECK(entries[0].tag == "embed-tag");
    CHECK(entries[0].call_count == 1);
}

TEST_CASE("embedding transport failures honor the retry budget") {
    std::shared_ptr<ScriptedChatBackend> chat;
    std::shared_ptr<HashEmbedBackend> embed;
    Gateway gateway = make_gateway(chat, embed);

    embed->fail_next(2);
    auto results = gateway.embed_texts(test_config(), {"x"}, "e");
    CHECK(results.size() == 1);

    embed->fail_next(3);
    CHECK_THROWS_AS(gateway.embed_texts(test_config(), {"x"}, "e"), TransportError);
}

TEST_CASE("embedding input validation") {
    std::shared_ptr<ScriptedChatBackend> chat;
    std::shared_ptr<HashEmbedBackend> embed;
    Gateway gateway = make_gateway(chat, embed);

    CHECK_THROWS_AS(gateway.embed_texts(test_config(), {}, "e"), std::invalid_argument);
    CHECK_THROWS_AS(gateway.embed_texts(test_config(), {"ok", "  "}, "e"), std::invalid_argument);
}

TEST_CASE("extract_json_block handles fences, bare objects, and garbage") {
    CHECK(extract_json_block("```json\n{\"a\": 1}\n```") == "{\"a\": 1}");
    CHECK(extract_json_block("```\n{\"a\": 1}\n```") == "{\"a\": 1}");
    CHECK(extract_json_block("prefix {\"a\": {\"b\": 2}} suffix") == "{\"a\": {\"b\": 2}}");
    CHECK(extract_json_block("text with \"{ not json\" then {\"a\": \"}\"} end") ==
          "{\"a\": \"}\"}");
    CHECK_THROWS_AS(extract_json_block("no json here"), GenerationParseError);
    CHECK_THROWS_AS(extract_json_block("{\"unbalanced\": true"), GenerationParseError);
}

TEST_CASE("complete_json parses clean replies without repair") {
    std::shared_ptr<ScriptedChatBackend> chat;
    std::shared_ptr<HashEmbedBackend> embed;
    Gateway gateway = make_gateway(chat, embed);
    chat->script("j", {ScriptStep::reply_json({{"k", "v"}})});

    JsonCompletion out = gateway.complete_json(test_config(), {user_message("go")}, "j");
    REQUIRE(out.ok());
    CHECK((*out.value)["k"] == "v");
    CHECK_FALSE(out.repaired);
    CHECK(out.exchanges.size() == 1);
}

TEST_CASE("complete_json re-prompts once on parse failure") {
    std::shared_ptr<ScriptedChatBackend> chat;
    std::shared_ptr<HashEmbedBackend> embed;
    Gateway gateway = make_gateway(chat, embed);

    SUBCASE("repair succeeds") {
        chat->script("j", {ScriptStep::reply("not json at all"),
                           ScriptStep::reply_json({{"fixed", true}})});
        JsonCompletion out = gateway.complete_json(test_config(), {user_message("go")}, "j");
        REQUIRE(out.ok());
        CHECK((*out.value)["fixed"] == true);
        CHECK(out.repaired);
        REQUIRE(out.exchanges.size() == 2);
        // the repair prompt carries the failed reply back to the model
        const auto& repair_messages = out.exchanges[1].messages;
        REQUIRE(repair_messages.size() == 3);
        CHECK(repair_messages[1].role == Role::Assistant);
        CHECK(repair_messages[1].text == "not json at all");
        CHECK(repair_messages[2].role == Role::User);
    }

    SUBCASE("repair fails too") {
        chat->script("j", {ScriptStep::reply("still not json"), ScriptStep::reply("nope")});
        JsonCompletion out = gateway.complete_json(test_config(), {user_message("go")}, "j");
        CHECK_FALSE(out.ok());
        CHECK(out.repaired);
        CHECK_FALSE(out.error.empty());
        CHECK(out.exchanges.size() == 2);
    }
}

TEST_CASE("complete_json validator rejections trigger the same repair path") {
    std::shared_ptr<ScriptedChatBackend> chat;
    std::shared_ptr<HashEmbedBackend> embed;
    Gateway gateway = make_gateway(chat, embed);
    chat->script("j", {ScriptStep::reply_json({{"n", -1}}), ScriptStep::reply_json({{"n", 3}})});

    auto validator = [](const nlohmann::json& v) -> std::optional<std::string> {
        if (!v.contains("n") || v["n"].get<int>() < 0) return "n must be non-negative";
        return std::nullopt;
    };
    JsonCompletion out = gateway.complete_json(test_config(), {user_message("go")}, "j", validator);
    REQUIRE(out.ok());
    CHECK((*out.value)["n"] == 3);
    CHECK(out.repaired);
}

TEST_CASE("ledger aggregates across tags and resets") {
    std::shared_ptr<ScriptedChatBackend> chat;
    std::shared_ptr<HashEmbedBackend> embed;
    Gateway gateway = make_gateway(chat, embed);
    chat->script("a", {ScriptStep::reply("1").with_usage(3, 1), ScriptStep::reply("2").with_usage(4, 2)});
    chat->script("b", {ScriptStep::reply("3").with_usage(10, 10)});

    gateway.complete_chat(test_config(), {user_message("x")}, "a");
    gateway.complete_chat(test_config(), {user_message("x")}, "a");
    gateway.complete_chat(test_config(), {user_message("x")}, "b");

    auto entries = gateway.snapshot_ledger();
    REQUIRE(entries.size() == 2);
    CHECK(entries[0].tag == "a");
    CHECK(entries[0].call_count == 2);
    CHECK(entries[0].usage.prompt_tokens == 7);
    CHECK(entries[0].usage.completion_tokens == 3);
    CHECK(entries[1].tag == "b");
    CHECK(entries[1].usage.total() == 20);

    gateway.ledger()->reset();
    CHECK(gateway.snapshot_ledger().empty());
}
