#pragma once

#include <algorithm>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace impress {

/// Reciprocal rank of the first gold item within the top k, 0 when none of the
/// gold set appears there.
inline double mrr_at_k(const std::vector<std::string>& ranked, const std::set<std::string>& gold,
                       int k) {
    if (k < 1) throw std::invalid_argument("k must be >= 1");
    if (gold.empty()) throw std::invalid_argument("gold set must be non-empty");
    const std::size_t cutoff = std::min<std::size_t>(ranked.size(), static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < cutoff; ++i)
        if (gold.count(ranked[i])) return 1.0 / static_cast<double>(i + 1);
    return 0.0;
}

/// Fraction of the gold set present in the top k.
inline double recall_at_k(const std::vector<std::string>& ranked, const std::set<std::string>& gold,
                          int k) {
    if (k < 1) throw std::invalid_argument("k must be >= 1");
    if (gold.empty()) throw std::invalid_argument("gold set must be non-empty");
    const std::size_t cutoff = std::min<std::size_t>(ranked.size(), static_cast<std::size_t>(k));
    std::set<std::string> seen;
    std::size_t found = 0;
    for (std::size_t i = 0; i < cutoff; ++i) {
        if (gold.count(ranked[i]) && seen.insert(ranked[i]).second) ++found;
    }
    return static_cast<double>(found) / static_cast<double>(gold.size());
}

}  // namespace impress
