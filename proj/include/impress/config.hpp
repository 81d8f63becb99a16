#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "impress/errors.hpp"
#include "impress/llm.hpp"
#include "impress/pipeline.hpp"
#include "impress/spc.hpp"

namespace impress {

struct ServiceOptions {
    std::string bind_address = "127.0.0.1";
    int port = 8080;
    double request_timeout_s = 30.0;
};

/// Whole-application configuration: one declarative JSON file, every field
/// optional, environment variables override endpoints. The fingerprint covers
/// exactly what shapes recommendation output, so reports from the same logical
/// setup hash identically regardless of paths.
struct AppConfig {
    std::filesystem::path catalog_dir = "catalog";
    std::filesystem::path dataset_path;
    std::filesystem::path report_dir = "reports";

    ModelConfig chat{"impress-chat", 0.3, 1024, "http://127.0.0.1:8000/v1/chat/completions",
                     "IMPRESS_LLM_API_KEY"};
    ModelConfig embed{"impress-embed", 0.0, 1024, "http://127.0.0.1:8000/v1/embeddings",
                      "IMPRESS_EMBED_API_KEY"};
    ModelConfig sim_user{"impress-chat", 1.0, 1024,
                         "http://127.0.0.1:8000/v1/chat/completions", "IMPRESS_LLM_API_KEY"};
    ModelConfig sim_assistant{"impress-chat", 1.0, 1024,
                              "http://127.0.0.1:8000/v1/chat/completions", "IMPRESS_LLM_API_KEY"};

    std::string search_endpoint;
    std::string search_api_key_ref = "IMPRESS_SEARCH_API_KEY";

    PipelineOptions pipeline;
    ServiceOptions service;

    bool mock_mode = false;
    std::filesystem::path fixtures_path;

    std::string fingerprint() const { return pipeline_fingerprint(chat, embed, pipeline); }
};

namespace detail {

inline void merge_model_config(ModelConfig& config, const nlohmann::json& j,
                               const std::string& name) {
    if (!j.is_object()) throw ConfigError("models." + name + " must be an object");
    if (j.contains("model_id")) config.model_id = j["model_id"].get<std::string>();
    if (j.contains("temperature")) config.temperature = j["temperature"].get<double>();
    if (j.contains("max_output_tokens")) config.max_output_tokens = j["max_output_tokens"].get<int>();
    if (j.contains("endpoint")) config.endpoint = j["endpoint"].get<std::string>();
    if (j.contains("api_key_ref")) config.api_key_ref = j["api_key_ref"].get<std::string>();
}

}  // namespace detail

inline AppConfig app_config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config root must be a JSON object");
    AppConfig config;
    try {
        if (j.contains("paths")) {
            const auto& paths = j["paths"];
            if (paths.contains("catalog_dir"))
                config.catalog_dir = paths["catalog_dir"].get<std::string>();
            if (paths.contains("dataset")) config.dataset_path = paths["dataset"].get<std::string>();
            if (paths.contains("report_dir"))
                config.report_dir = paths["report_dir"].get<std::string>();
        }
        if (j.contains("models")) {
            const auto& models = j["models"];
            if (models.contains("chat")) detail::merge_model_config(config.chat, models["chat"], "chat");
            if (models.contains("embedding"))
                detail::merge_model_config(config.embed, models["embedding"], "embedding");
            if (models.contains("sim_user"))
                detail::merge_model_config(config.sim_user, models["sim_user"], "sim_user");
            if (models.contains("sim_assistant"))
                detail::merge_model_config(config.sim_assistant, models["sim_assistant"],
                                           "sim_assistant");
        }
        if (j.contains("pipeline")) {
            const auto& p = j["pipeline"];
            if (p.contains("k_per_index")) config.pipeline.k_per_index = p["k_per_index"].get<int>();
            if (p.contains("bootstrap_iterations"))
                config.pipeline.bootstrap_iterations = p["bootstrap_iterations"].get<int>();
            if (p.contains("base_seed"))
                config.pipeline.base_seed = p["base_seed"].get<std::uint64_t>();
            if (p.contains("max_preliminary"))
                config.pipeline.max_preliminary = p["max_preliminary"].get<int>();
            if (p.contains("concurrent_ranking"))
                config.pipeline.concurrent_ranking = p["concurrent_ranking"].get<bool>();
            if (p.contains("enabled_sources")) {
                config.pipeline.enabled_sources.clear();
                for (const auto& name : p["enabled_sources"])
                    config.pipeline.enabled_sources.push_back(
                        source_from_string(name.get<std::string>()));
            }
        }
        if (j.contains("search")) {
            const auto& s = j["search"];
            if (s.contains("endpoint")) config.search_endpoint = s["endpoint"].get<std::string>();
            if (s.contains("api_key_ref"))
                config.search_api_key_ref = s["api_key_ref"].get<std::string>();
        }
        if (j.contains("service")) {
            const auto& s = j["service"];
            if (s.contains("bind_address"))
                config.service.bind_address = s["bind_address"].get<std::string>();
            if (s.contains("port")) config.service.port = s["port"].get<int>();
            if (s.contains("request_timeout_s"))
                config.service.request_timeout_s = s["request_timeout_s"].get<double>();
        }
        if (j.contains("mock")) {
            const auto& m = j["mock"];
            if (m.contains("enabled")) config.mock_mode = m["enabled"].get<bool>();
            if (m.contains("fixtures")) config.fixtures_path = m["fixtures"].get<std::string>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad config value: ") + e.what());
    }
    return config;
}

inline void apply_env_overrides(AppConfig& config) {
    if (const char* endpoint = std::getenv("IMPRESS_LLM_ENDPOINT")) {
        config.chat.endpoint = endpoint;
        config.sim_user.endpoint = endpoint;
        config.sim_assistant.endpoint = endpoint;
    }
    if (const char* endpoint = std::getenv("IMPRESS_EMBED_ENDPOINT"))
        config.embed.endpoint = endpoint;
}

inline AppConfig load_app_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("bad JSON in " + path.string() + ": " + e.what());
    }
    AppConfig config = app_config_from_json(j);
    apply_env_overrides(config);
    return config;
}

}  // namespace impress
