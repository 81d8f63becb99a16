#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

namespace impress {

struct TokenUsage {
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;

    std::int64_t total() const { return prompt_tokens + completion_tokens; }

    TokenUsage& operator+=(const TokenUsage& other) {
        prompt_tokens += other.prompt_tokens;
        completion_tokens += other.completion_tokens;
        return *this;
    }
    friend TokenUsage operator+(TokenUsage lhs, const TokenUsage& rhs) { return lhs += rhs; }
    bool operator==(const TokenUsage&) const = default;
};

/// Whitespace-split token count. This is the mock tokenizer: cheap and
/// deterministic. Real backends report their own usage, which takes precedence.
inline std::int64_t approx_token_count(std::string_view text) {
    std::int64_t count = 0;
    bool in_token = false;
    for (unsigned char c : text) {
        if (std::isspace(c)) {
            in_token = false;
        } else if (!in_token) {
            in_token = true;
            ++count;
        }
    }
    return count;
}

struct LatencyQuartiles {
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    bool operator==(const LatencyQuartiles&) const = default;
};

/// Linear-interpolation quartiles over a copy of the samples. Empty input
/// yields all zeros.
inline LatencyQuartiles latency_quartiles(std::vector<double> samples) {
    if (samples.empty()) return {};
    std::sort(samples.begin(), samples.end());
    auto at = [&](double p) {
        double h = p * static_cast<double>(samples.size() - 1);
        std::size_t lo = static_cast<std::size_t>(h);
        std::size_t hi = std::min(lo + 1, samples.size() - 1);
        double frac = h - static_cast<double>(lo);
        return samples[lo] + frac * (samples[hi] - samples[lo]);
    };
    return {at(0.25), at(0.5), at(0.75)};
}

struct LedgerEntry {
    std::string tag;
    std::int64_t call_count = 0;
    TokenUsage usage;
    std::vector<double> latencies_ms;

    LatencyQuartiles quartiles() const { return latency_quartiles(latencies_ms); }
    bool operator==(const LedgerEntry&) const = default;
};

/// Per-tag call/usage/latency accounting. Internally synchronized; a snapshot
/// is a point-in-time deep copy and never mutates afterwards.
class TokenLedger {
public:
    void record(const std::string& tag, const TokenUsage& usage, double latency_ms) {
        std::lock_guard<std::mutex> lock(mutex_);
        LedgerEntry& entry = entries_[tag];
        entry.tag = tag;
        entry.call_count += 1;
        entry.usage += usage;
        entry.latencies_ms.push_back(latency_ms);
    }

    /// Entries sorted by tag.
    std::vector<LedgerEntry> snapshot() const {
        std::lock_guard<std::mutex> lock(mutex_);
        std::vector<LedgerEntry> out;
        out.reserve(entries_.size());
        for (const auto& [_, entry] : entries_) out.push_back(entry);
        return out;
    }

    void reset() {
        std::lock_guard<std::mutex> lock(mutex_);
        entries_.clear();
    }

private:
    mutable std::mutex mutex_;
    std::map<std::string, LedgerEntry> entries_;
};

/// Per-tag difference `after - before`. `before` must be an earlier snapshot
/// of the same ledger; latencies are matched as list suffixes.
inline std::vector<LedgerEntry> ledger_delta(const std::vector<LedgerEntry>& before,
                                             const std::vector<LedgerEntry>& after) {
    std::map<std::string, const LedgerEntry*> prior;
    for (const auto& entry : before) prior[entry.tag] = &entry;

    std::vector<LedgerEntry> delta;
    for (const auto& entry : after) {
        LedgerEntry d = entry;
        if (auto it = prior.find(entry.tag); it != prior.end()) {
            const LedgerEntry& b = *it->second;
            d.call_count -= b.call_count;
            d.usage.prompt_tokens -= b.usage.prompt_tokens;
            d.usage.completion_tokens -= b.usage.completion_tokens;
            d.latencies_ms.assign(entry.latencies_ms.begin() +
                                      static_cast<std::ptrdiff_t>(b.latencies_ms.size()),
                                  entry.latencies_ms.end());
        }
        if (d.call_count > 0) delta.push_back(std::move(d));
    }
    return delta;
}

}  // namespace impress
