#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "impress/errors.hpp"
#include "impress/ledger.hpp"
#include "impress/llm.hpp"
#include "impress/rng.hpp"

namespace impress {

/// One scripted backend reply. `delay_ms` really sleeps (for timeout tests);
/// `latency_ms` is the latency the backend *reports*, so scripted runs stay
/// deterministic down to the ledger.
struct ScriptStep {
    enum class Kind { Text, TransportFail, AuthFail, Empty };

    Kind kind = Kind::Text;
    std::string text;
    std::optional<TokenUsage> usage;
    double latency_ms = 0.0;
    int delay_ms = 0;

    static ScriptStep reply(std::string text) { return {Kind::Text, std::move(text), {}, 0.0, 0}; }
    static ScriptStep reply_json(const nlohmann::json& value) {
        return reply("```json\n" + value.dump() + "\n```");
    }
    static ScriptStep transport_fail() { return {Kind::TransportFail, {}, {}, 0.0, 0}; }
    static ScriptStep auth_fail() { return {Kind::AuthFail, {}, {}, 0.0, 0}; }
    static ScriptStep empty() { return {Kind::Empty, {}, {}, 0.0, 0}; }

    ScriptStep& with_usage(std::int64_t prompt, std::int64_t completion) {
        usage = TokenUsage{prompt, completion};
        return *this;
    }
    ScriptStep& with_latency(double ms) {
        latency_ms = ms;
        return *this;
    }
    ScriptStep& with_delay(int ms) {
        delay_ms = ms;
        return *this;
    }
};

/// Deterministic chat backend scripted per ledger tag. Steps are consumed in
/// order and the script cycles once exhausted, so fixed-length scripts line up
/// with repeated evaluation passes. Unknown tags get `default_reply`.
class ScriptedChatBackend : public ChatBackend {
public:
    void script(const std::string& tag, std::vector<ScriptStep> steps) {
        std::lock_guard<std::mutex> lock(mutex_);
        scripts_[tag] = std::move(steps);
        cursor_[tag] = 0;
    }

    void set_default_reply(std::string text) {
        std::lock_guard<std::mutex> lock(mutex_);
        default_reply_ = std::move(text);
    }

    /// Every reply reports this usage, regardless of content.
    void set_fixed_usage(TokenUsage usage) {
        std::lock_guard<std::mutex> lock(mutex_);
        fixed_usage_ = usage;
    }

    std::int64_t calls(const std::string& tag) const {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = call_counts_.find(tag);
        return it == call_counts_.end() ? 0 : it->second;
    }

    ChatResult complete(const ModelConfig&, const std::vector<ChatMessage>& messages,
                        const std::string& ledger_tag) override {
        ScriptStep step;
        {
            std::lock_guard<std::mutex> lock(mutex_);
            ++call_counts_[ledger_tag];
            auto it = scripts_.find(ledger_tag);
            if (it == scripts_.end() || it->second.empty()) {
                step = ScriptStep::reply(default_reply_);
            } else {
                std::size_t& cursor = cursor_[ledger_tag];
                step = it->second[cursor % it->second.size()];
                ++cursor;
            }
            if (!step.usage && fixed_usage_) step.usage = fixed_usage_;
        }
        return run_step(step, messages);
    }

    static ChatResult run_step(const ScriptStep& step, const std::vector<ChatMessage>& messages) {
        if (step.delay_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(step.delay_ms));
        switch (step.kind) {
            case ScriptStep::Kind::TransportFail:
                throw TransportError("scripted transport failure");
            case ScriptStep::Kind::AuthFail:
                throw AuthError("scripted auth failure");
            case ScriptStep::Kind::Empty:
                return {"", TokenUsage{}, step.latency_ms};
            case ScriptStep::Kind::Text:
                break;
        }
        ChatResult result;
        result.text = step.text;
        result.usage = step.usage ? *step.usage : detail::estimate_usage(messages, step.text);
        result.latency_ms = step.latency_ms;
        return result;
    }

private:
    mutable std::mutex mutex_;
    std::map<std::string, std::vector<ScriptStep>> scripts_;
    std::map<std::string, std::size_t> cursor_;
    std::map<std::string, std::int64_t> call_counts_;
    std::string default_reply_ = "OK";
    std::optional<TokenUsage> fixed_usage_;
};

/// Chat backend computing its reply from the request; handy for rankers that
/// must react to the presented candidate order.
class FunctionChatBackend : public ChatBackend {
public:
    using Fn = std::function<std::string(const ModelConfig&, const std::vector<ChatMessage>&,
                                         const std::string& tag)>;

    explicit FunctionChatBackend(Fn fn) : fn_(std::move(fn)) {}

    void set_fixed_usage(TokenUsage usage) { fixed_usage_ = usage; }

    ChatResult complete(const ModelConfig& config, const std::vector<ChatMessage>& messages,
                        const std::string& ledger_tag) override {
        ChatResult result;
        result.text = fn_(config, messages, ledger_tag);
        result.usage = fixed_usage_ ? *fixed_usage_ : detail::estimate_usage(messages, result.text);
        result.latency_ms = 0.0;
        return result;
    }

private:
    Fn fn_;
    std::optional<TokenUsage> fixed_usage_;
};

/// Deterministic embedding backend: FNV-hash of the text expanded to a fixed
/// dimension, entries in [-1, 1). Identical text always maps to the identical
/// vector, which makes exact-match retrieval testable offline.
class HashEmbedBackend : public EmbedBackend {
public:
    explicit HashEmbedBackend(std::size_t dimension = 8) : dimension_(dimension) {}

    void set_fixed_usage(TokenUsage usage) { fixed_usage_ = usage; }

    /// The next `n` embed calls throw TransportError before any work happens.
    void fail_next(int n) {
        std::lock_guard<std::mutex> lock(mutex_);
        fail_remaining_ = n;
    }

    std::size_t dimension() const { return dimension_; }

    static std::vector<float> hash_vector(std::string_view text, std::size_t dimension) {
        std::vector<float> v(dimension);
        std::uint64_t h = fnv1a64(text);
        for (std::size_t i = 0; i < dimension; ++i) {
            std::uint64_t x = splitmix64(h ^ (0x9e3779b97f4a7c15ull * (i + 1)));
            double unit = static_cast<double>(x >> 11) * 0x1.0p-53;  // [0,1)
            v[i] = static_cast<float>(unit * 2.0 - 1.0);
        }
        return v;
    }

    EmbedBatchResult embed(const ModelConfig&, const std::vector<std::string>& texts,
                           const std::string&) override {
        {
            std::lock_guard<std::mutex> lock(mutex_);
            if (fail_remaining_ > 0) {
                --fail_remaining_;
                throw TransportError("scripted embed transport failure");
            }
        }
        EmbedBatchResult batch;
        batch.vectors.reserve(texts.size());
        TokenUsage usage;
        for (const auto& t : texts) {
            batch.vectors.push_back(hash_vector(t, dimension_));
            usage.prompt_tokens += approx_token_count(t);
        }
        batch.usage = fixed_usage_ ? *fixed_usage_ : usage;
        batch.latency_ms = 0.0;
        return batch;
    }

private:
    std::size_t dimension_;
    std::optional<TokenUsage> fixed_usage_;
    std::mutex mutex_;
    int fail_remaining_ = 0;
};

}  // namespace impress
