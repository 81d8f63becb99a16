#pragma once

#include <chrono>
#include <cstdlib>
#include <string>
#include <utility>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "impress/errors.hpp"
#include "impress/llm.hpp"
#include "impress/web_search.hpp"

namespace impress {
namespace detail {

struct SplitUrl {
    std::string base;  // scheme://host[:port]
    std::string path;
};

inline SplitUrl split_url(const std::string& url) {
    const std::size_t scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw ConfigError("endpoint must include a scheme: " + url);
    const std::size_t path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

inline std::string resolve_api_key(const std::string& api_key_ref) {
    if (api_key_ref.empty()) return "";
    const char* value = std::getenv(api_key_ref.c_str());
    return value ? value : "";
}

inline httplib::Headers auth_headers(const ModelConfig& config) {
    httplib::Headers headers;
    const std::string key = resolve_api_key(config.api_key_ref);
    if (!key.empty()) headers.emplace("Authorization", "Bearer " + key);
    return headers;
}

/// Shared status handling: 401/403 are auth failures, 5xx and transport-level
/// failures are retryable, any other non-2xx is a refusal.
inline nlohmann::json post_json(const std::string& endpoint, const httplib::Headers& headers,
                                const nlohmann::json& body, double timeout_s) {
    const SplitUrl url = split_url(endpoint);
    httplib::Client client(url.base);
    client.set_connection_timeout(std::chrono::milliseconds(
        static_cast<int>(timeout_s * 1000)));
    client.set_read_timeout(std::chrono::milliseconds(static_cast<int>(timeout_s * 1000)));

    httplib::Result res = client.Post(url.path, headers, body.dump(), "application/json");
    if (!res) throw TransportError("no response from " + url.base + ": " + to_string(res.error()));
    if (res->status == 401 || res->status == 403)
        throw AuthError("authentication failed (" + std::to_string(res->status) + ") at " +
                        endpoint);
    if (res->status >= 500)
        throw TransportError("server error " + std::to_string(res->status) + " at " + endpoint);
    if (res->status < 200 || res->status >= 300)
        throw BackendRefusal("backend returned " + std::to_string(res->status) + ": " +
                             res->body.substr(0, 200));
    try {
        return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
        throw TransportError(std::string("malformed response JSON: ") + e.what());
    }
}

}  // namespace detail

/// Chat-completions wire shape: {"model", "temperature", "max_tokens",
/// "messages": [{"role", "content"}]} -> choices[0].message.content.
class HttpChatBackend : public ChatBackend {
public:
    explicit HttpChatBackend(double timeout_s = 60.0) : timeout_s_(timeout_s) {}

    ChatResult complete(const ModelConfig& config, const std::vector<ChatMessage>& messages,
                        const std::string&) override {
        nlohmann::json body;
        body["model"] = config.model_id;
        body["temperature"] = config.temperature;
        body["max_tokens"] = config.max_output_tokens;
        body["messages"] = nlohmann::json::array();
        for (const auto& m : messages)
            body["messages"].push_back({{"role", to_string(m.role)}, {"content", m.text}});

        const auto start = std::chrono::steady_clock::now();
        nlohmann::json response =
            detail::post_json(config.endpoint, detail::auth_headers(config), body, timeout_s_);
        const double elapsed_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                .count();

        ChatResult result;
        result.latency_ms = elapsed_ms;
        try {
            result.text = response.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw TransportError(std::string("unexpected chat response shape: ") + e.what());
        }
        if (response.contains("usage") && response["usage"].is_object()) {
            const auto& usage = response["usage"];
            TokenUsage u;
            u.prompt_tokens = usage.value("prompt_tokens", std::int64_t{0});
            u.completion_tokens = usage.value("completion_tokens", std::int64_t{0});
            result.usage = u;
        }
        return result;
    }

private:
    double timeout_s_;
};

/// Embeddings wire shape: {"model", "input": [...]} -> data[i].embedding.
class HttpEmbedBackend : public EmbedBackend {
public:
    explicit HttpEmbedBackend(double timeout_s = 60.0) : timeout_s_(timeout_s) {}

    EmbedBatchResult embed(const ModelConfig& config, const std::vector<std::string>& texts,
                           const std::string&) override {
        nlohmann::json body;
        body["model"] = config.model_id;
        body["input"] = texts;

        const auto start = std::chrono::steady_clock::now();
        nlohmann::json response =
            detail::post_json(config.endpoint, detail::auth_headers(config), body, timeout_s_);
        const double elapsed_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                .count();

        EmbedBatchResult result;
        result.latency_ms = elapsed_ms;
        try {
            const auto& data = response.at("data");
            result.vectors.resize(data.size());
            for (std::size_t i = 0; i < data.size(); ++i) {
                const auto& item = data[i];
                const std::size_t index =
                    item.contains("index") ? item.at("index").get<std::size_t>() : i;
                if (index >= result.vectors.size())
                    throw TransportError("embedding index out of range");
                std::vector<float> vec;
                for (const auto& v : item.at("embedding")) vec.push_back(v.get<float>());
                result.vectors[index] = std::move(vec);
            }
        } catch (const nlohmann::json::exception& e) {
            throw TransportError(std::string("unexpected embedding response shape: ") + e.what());
        }
        if (response.contains("usage") && response["usage"].is_object()) {
            const auto& usage = response["usage"];
            TokenUsage u;
            u.prompt_tokens = usage.value("prompt_tokens", std::int64_t{0});
            u.completion_tokens = usage.value("completion_tokens", std::int64_t{0});
            result.usage = u;
        }
        return result;
    }

private:
    double timeout_s_;
};

/// JSON-over-HTTP search: POST {"query", "max_results"} ->
/// {"results": [{"title", "content", "url"}]}.
class HttpSearchClient : public SearchClient {
public:
    explicit HttpSearchClient(std::string endpoint, std::string api_key_env = "",
                              double timeout_s = 30.0)
        : endpoint_(std::move(endpoint)), api_key_env_(std::move(api_key_env)),
          timeout_s_(timeout_s) {}

    std::vector<WebSearchResult> search(const std::string& query, int max_results) override {
        nlohmann::json body;
        body["query"] = query;
        body["max_results"] = max_results;
        httplib::Headers headers;
        const std::string key = detail::resolve_api_key(api_key_env_);
        if (!key.empty()) headers.emplace("Authorization", "Bearer " + key);

        nlohmann::json response;
        try {
            response = detail::post_json(endpoint_, headers, body, timeout_s_);
        } catch (const Error& e) {
            throw SearchTransportError(e.what());
        }
        std::vector<WebSearchResult> results;
        for (const auto& item : response.value("results", nlohmann::json::array())) {
            if (static_cast<int>(results.size()) >= max_results) break;
            results.push_back({item.value("title", ""), item.value("content", ""),
                               item.value("url", "")});
        }
        return results;
    }

private:
    std::string endpoint_;
    std::string api_key_env_;
    double timeout_s_;
};

}  // namespace impress
