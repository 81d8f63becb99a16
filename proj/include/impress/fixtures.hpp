#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "impress/errors.hpp"
#include "impress/mock_llm.hpp"

namespace impress {

/// Offline backend bundle loaded from one fixture file, so every CLI command
/// and the service can run with --mock and no network.
///
/// Fixture shape:
/// {
///   "embed_dimension": 8,
///   "default_reply": "OK",
///   "fixed_usage": {"prompt_tokens": 10, "completion_tokens": 5},
///   "chat_scripts": {
///     "<ledger-tag>": [
///       {"text": "plain reply"},
///       {"json": { ... }},            // wrapped in a ```json fence
///       {"fail": "transport"|"auth"|"empty"},
///       ... entries cycle when exhausted ...
///     ]
///   },
///   "search_fixtures_dir": "searches"  // relative to the fixture file
/// }
struct MockFixtures {
    std::shared_ptr<ScriptedChatBackend> chat;
    std::shared_ptr<HashEmbedBackend> embed;
    std::filesystem::path search_fixtures_dir;  // empty when not configured
};

inline MockFixtures load_mock_fixtures(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open fixtures file " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("bad JSON in " + path.string() + ": " + e.what());
    }
    if (!j.is_object()) throw ConfigError("fixtures root must be a JSON object");

    MockFixtures fixtures;
    fixtures.chat = std::make_shared<ScriptedChatBackend>();
    fixtures.embed = std::make_shared<HashEmbedBackend>(j.value("embed_dimension", 8));

    if (j.contains("default_reply"))
        fixtures.chat->set_default_reply(j["default_reply"].get<std::string>());
    if (j.contains("fixed_usage")) {
        TokenUsage usage;
        usage.prompt_tokens = j["fixed_usage"].value("prompt_tokens", std::int64_t{0});
        usage.completion_tokens = j["fixed_usage"].value("completion_tokens", std::int64_t{0});
        fixtures.chat->set_fixed_usage(usage);
        fixtures.embed->set_fixed_usage(usage);
    }

    const nlohmann::json scripts = j.value("chat_scripts", nlohmann::json::object());
    for (const auto& [tag, entries] : scripts.items()) {
        if (!entries.is_array())
            throw ConfigError("chat_scripts." + tag + " must be a list of steps");
        std::vector<ScriptStep> steps;
        for (const auto& entry : entries) {
            if (!entry.is_object())
                throw ConfigError("chat_scripts." + tag + ": every step must be an object");
            if (entry.contains("text")) {
                steps.push_back(ScriptStep::reply(entry["text"].get<std::string>()));
            } else if (entry.contains("json")) {
                steps.push_back(ScriptStep::reply_json(entry["json"]));
            } else if (entry.contains("fail")) {
                const std::string kind = entry["fail"].get<std::string>();
                if (kind == "transport") steps.push_back(ScriptStep::transport_fail());
                else if (kind == "auth") steps.push_back(ScriptStep::auth_fail());
                else if (kind == "empty") steps.push_back(ScriptStep::empty());
                else throw ConfigError("chat_scripts." + tag + ": unknown fail kind " + kind);
            } else {
                throw ConfigError("chat_scripts." + tag +
                                  ": step needs \"text\", \"json\", or \"fail\"");
            }
        }
        fixtures.chat->script(tag, std::move(steps));
    }

    if (j.contains("search_fixtures_dir")) {
        std::filesystem::path dir = j["search_fixtures_dir"].get<std::string>();
        if (dir.is_relative()) dir = path.parent_path() / dir;
        fixtures.search_fixtures_dir = dir;
    }
    return fixtures;
}

}  // namespace impress
