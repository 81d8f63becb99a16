#pragma once

#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "impress/errors.hpp"
#include "impress/ledger.hpp"

namespace impress {

enum class Role { System, User, Assistant };

inline std::string to_string(Role role) {
    switch (role) {
        case Role::System: return "system";
        case Role::User: return "user";
        case Role::Assistant: return "assistant";
    }
    return "user";
}

inline Role role_from_string(const std::string& s) {
    if (s == "system") return Role::System;
    if (s == "user") return Role::User;
    if (s == "assistant") return Role::Assistant;
    throw ConfigError("unknown role: " + s);
}

struct ChatMessage {
    Role role = Role::User;
    std::string text;
};

inline ChatMessage system_message(std::string text) { return {Role::System, std::move(text)}; }
inline ChatMessage user_message(std::string text) { return {Role::User, std::move(text)}; }
inline ChatMessage assistant_message(std::string text) { return {Role::Assistant, std::move(text)}; }

struct ModelConfig {
    std::string model_id;
    double temperature = 0.3;  // catalog/pipeline regime; simulation uses 1.0
    int max_output_tokens = 1024;
    std::string endpoint;
    std::string api_key_ref;  // name of the environment variable holding the key

    void validate() const {
        if (model_id.empty()) throw ConfigError("model_id must be non-empty");
        if (endpoint.empty()) throw ConfigError("endpoint must be non-empty");
        if (!(temperature >= 0.0 && temperature <= 2.0))
            throw ConfigError("temperature must lie in [0,2]");
        if (max_output_tokens <= 0) throw ConfigError("max_output_tokens must be positive");
    }
};

struct ChatExchange {
    std::vector<ChatMessage> messages;
    std::string response_text;
    TokenUsage usage;
    double latency_ms = 0.0;
    int attempts = 1;
};

struct EmbeddingResult {
    std::vector<float> vector;
    std::size_t dimension = 0;
    TokenUsage usage;
};

/// What a chat backend hands back for one attempt. Backends signal failures by
/// throwing TransportError / AuthError; usage and latency are optional and are
/// estimated by the gateway when absent.
struct ChatResult {
    std::string text;
    std::optional<TokenUsage> usage;
    std::optional<double> latency_ms;
};

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual ChatResult complete(const ModelConfig& config, const std::vector<ChatMessage>& messages,
                                const std::string& ledger_tag) = 0;
};

struct EmbedBatchResult {
    std::vector<std::vector<float>> vectors;
    std::optional<TokenUsage> usage;
    std::optional<double> latency_ms;
};

class EmbedBackend {
public:
    virtual ~EmbedBackend() = default;
    virtual EmbedBatchResult embed(const ModelConfig& config, const std::vector<std::string>& texts,
                                   const std::string& ledger_tag) = 0;
};

/// Transport retry policy: a call issues at most 1 + retry_limit attempts.
struct RetryPolicy {
    int retry_limit = 2;
    int base_delay_ms = 250;
    double backoff_factor = 2.0;
    bool full_jitter = true;
};

namespace detail {

inline std::string trim_copy(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

inline std::string to_lower_copy(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

inline TokenUsage estimate_usage(const std::vector<ChatMessage>& messages, std::string_view response) {
    TokenUsage usage;
    for (const auto& m : messages) usage.prompt_tokens += approx_token_count(m.text);
    usage.completion_tokens = approx_token_count(response);
    return usage;
}

}  // namespace detail

/// Pulls the first JSON object out of a model reply: a fenced ``` block when
/// present, otherwise the first balanced {...} span. Throws
/// GenerationParseError when neither exists.
inline std::string extract_json_block(const std::string& text) {
    std::size_t fence = text.find("```");
    if (fence != std::string::npos) {
        std::size_t start = fence + 3;
        // skip an optional language word up to end of line
        std::size_t eol = text.find('\n', start);
        if (eol != std::string::npos) {
            std::string lang = detail::trim_copy(text.substr(start, eol - start));
            bool word = !lang.empty();
            for (char c : lang)
                if (!std::isalnum(static_cast<unsigned char>(c))) word = false;
            if (word || lang.empty()) start = eol + 1;
        }
        std::size_t close = text.find("```", start);
        if (close != std::string::npos) {
            std::string body = detail::trim_copy(text.substr(start, close - start));
            if (!body.empty()) return body;
        }
    }
    // Prose can contain stray braces and quotes, so a scan from the first
    // brace may balance on garbage. Try each opening brace in turn and return
    // the first balanced block that parses.
    for (std::size_t open = text.find('{'); open != std::string::npos;
         open = text.find('{', open + 1)) {
        int depth = 0;
        bool in_string = false;
        for (std::size_t i = open; i < text.size(); ++i) {
            char c = text[i];
            if (in_string) {
                if (c == '\\')
                    ++i;
                else if (c == '"')
                    in_string = false;
                continue;
            }
            if (c == '"') in_string = true;
            else if (c == '{') ++depth;
            else if (c == '}') {
                --depth;
                if (depth == 0) {
                    std::string candidate = text.substr(open, i - open + 1);
                    if (nlohmann::json::accept(candidate)) return candidate;
                    break;
                }
            }
        }
    }
    throw GenerationParseError("no JSON object found in response");
}

/// Result of a structured-output call, including the repair exchange when one
/// was needed. `value` is empty when even the repair reply failed to parse.
struct JsonCompletion {
    std::optional<nlohmann::json> value;
    std::string error;
    std::vector<ChatExchange> exchanges;
    bool repaired = false;

    bool ok() const { return value.has_value(); }
    TokenUsage usage() const {
        TokenUsage total;
        for (const auto& ex : exchanges) total += ex.usage;
        return total;
    }
};

/// Provider-agnostic access to chat completion and text embedding, with a
/// transport retry policy and a per-tag token/time ledger shared by every call
/// that goes through this gateway.
class Gateway {
public:
    using JsonValidator = std::function<std::optional<std::string>(const nlohmann::json&)>;

    Gateway(std::shared_ptr<ChatBackend> chat, std::shared_ptr<EmbedBackend> embed,
            RetryPolicy retry = {}, std::shared_ptr<TokenLedger> ledger = nullptr)
        : chat_(std::move(chat)),
          embed_(std::move(embed)),
          retry_(retry),
          ledger_(ledger ? std::move(ledger) : std::make_shared<TokenLedger>()) {}

    ChatExchange complete_chat(const ModelConfig& config, const std::vector<ChatMessage>& messages,
                               const std::string& ledger_tag) {
        config.validate();
        if (messages.empty()) throw std::invalid_argument("messages must be non-empty");
        if (messages.front().role == Role::Assistant)
            throw std::invalid_argument("first message must be system or user");

        int attempt = 0;
        for (;;) {
            ++attempt;
            auto started = std::chrono::steady_clock::now();
            try {
                ChatResult result = chat_->complete(config, messages, ledger_tag);
                if (detail::trim_copy(result.text).empty()) {
                    if (attempt > retry_.retry_limit)
                        throw BackendRefusal("empty response after " + std::to_string(attempt) +
                                             " attempts (tag " + ledger_tag + ")");
                    backoff_sleep(attempt);
                    continue;
                }
                ChatExchange exchange;
                exchange.messages = messages;
                exchange.response_text = std::move(result.text);
                exchange.usage =
                    result.usage ? *result.usage : detail::estimate_usage(messages, exchange.response_text);
                exchange.latency_ms = result.latency_ms ? *result.latency_ms : elapsed_ms(started);
                exchange.attempts = attempt;
                ledger_->record(ledger_tag, exchange.usage, exchange.latency_ms);
                return exchange;
            } catch (const AuthError&) {
                throw;
            } catch (const TransportError&) {
                if (attempt > retry_.retry_limit) throw;
                backoff_sleep(attempt);
            }
        }
    }

    std::vector<EmbeddingResult> embed_texts(const ModelConfig& config,
                                             const std::vector<std::string>& texts,
                                             const std::string& ledger_tag) {
        config.validate();
        if (texts.empty()) throw std::invalid_argument("texts must be non-empty");
        for (const auto& t : texts)
            if (detail::trim_copy(t).empty())
                throw std::invalid_argument("embedding input texts must be non-empty");

        int attempt = 0;
        for (;;) {
            ++attempt;
            auto started = std::chrono::steady_clock::now();
            try {
                EmbedBatchResult batch = embed_->embed(config, texts, ledger_tag);
                if (batch.vectors.size() != texts.size())
                    throw DimensionMismatch("backend returned " + std::to_string(batch.vectors.size()) +
                                            " vectors for " + std::to_string(texts.size()) + " texts");
                std::size_t dimension = batch.vectors.empty() ? 0 : batch.vectors.front().size();
                if (dimension == 0) throw DimensionMismatch("backend returned zero-length vectors");
                for (const auto& v : batch.vectors) {
                    if (v.size() != dimension)
                        throw DimensionMismatch("backend returned inconsistent vector lengths");
                    for (float x : v)
                        if (!std::isfinite(x)) throw DimensionMismatch("non-finite embedding value");
                }

                TokenUsage usage;
                if (batch.usage) {
                    usage = *batch.usage;
                } else {
                    for (const auto& t : texts) usage.prompt_tokens += approx_token_count(t);
                }
                double latency = batch.latency_ms ? *batch.latency_ms : elapsed_ms(started);
                ledger_->record(ledger_tag, usage, latency);

                std::vector<EmbeddingResult> out;
                out.reserve(texts.size());
                for (std::size_t i = 0; i < texts.size(); ++i) {
                    EmbeddingResult r;
                    r.vector = std::move(batch.vectors[i]);
                    r.dimension = dimension;
                    r.usage = TokenUsage{approx_token_count(texts[i]), 0};
                    out.push_back(std::move(r));
                }
                return out;
            } catch (const AuthError&) {
                throw;
            } catch (const TransportError&) {
                if (attempt > retry_.retry_limit) throw;
                backoff_sleep(attempt);
            }
        }
    }

    /// Structured-output call: demands a single fenced JSON object and, when the
    /// reply cannot be parsed (or `validator` rejects it), re-prompts once with
    /// the parse error appended.
    JsonCompletion complete_json(const ModelConfig& config, const std::vector<ChatMessage>& messages,
                                 const std::string& ledger_tag, const JsonValidator& validator = {}) {
        JsonCompletion out;
        ChatExchange first = complete_chat(config, messages, ledger_tag);
        out.exchanges.push_back(first);

        std::string error;
        if (auto parsed = try_parse(first.response_text, validator, error)) {
            out.value = std::move(parsed);
            return out;
        }

        std::vector<ChatMessage> repair_messages = messages;
        repair_messages.push_back(assistant_message(first.response_text));
        repair_messages.push_back(user_message(
            "The previous reply could not be used: " + error +
            ". Reply again with exactly one fenced JSON object and nothing else."));
        out.repaired = true;
        ChatExchange second = complete_chat(config, repair_messages, ledger_tag);
        out.exchanges.push_back(second);

        if (auto parsed = try_parse(second.response_text, validator, error)) {
            out.value = std::move(parsed);
            return out;
        }
        out.error = error;
        return out;
    }

    std::vector<LedgerEntry> snapshot_ledger() const { return ledger_->snapshot(); }
    const std::shared_ptr<TokenLedger>& ledger() const { return ledger_; }
    const RetryPolicy& retry_policy() const { return retry_; }

private:
    static double elapsed_ms(std::chrono::steady_clock::time_point started) {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started)
            .count();
    }

    static std::optional<nlohmann::json> try_parse(const std::string& text,
                                                   const JsonValidator& validator, std::string& error) {
        try {
            std::string raw = extract_json_block(text);
            nlohmann::json parsed = nlohmann::json::parse(raw);
            if (validator) {
                if (auto rejection = validator(parsed)) {
                    error = *rejection;
                    return std::nullopt;
                }
            }
            return parsed;
        } catch (const GenerationParseError& e) {
            error = e.what();
        } catch (const nlohmann::json::parse_error& e) {
            error = e.what();
        }
        return std::nullopt;
    }

    void backoff_sleep(int attempt) {
        if (retry_.base_delay_ms <= 0) return;
        double delay = retry_.base_delay_ms * std::pow(retry_.backoff_factor, attempt - 1);
        if (retry_.full_jitter) {
            thread_local std::mt19937_64 jitter_rng{std::random_device{}()};
            double u = static_cast<double>(jitter_rng() >> 11) * 0x1.0p-53;
            delay *= u;
        }
        std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(delay));
    }

    std::shared_ptr<ChatBackend> chat_;
    std::shared_ptr<EmbedBackend> embed_;
    RetryPolicy retry_;
    std::shared_ptr<TokenLedger> ledger_;
};

}  // namespace impress
