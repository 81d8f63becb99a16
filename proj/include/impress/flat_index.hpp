#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include "impress/catalog.hpp"
#include "impress/errors.hpp"
#include "impress/spc.hpp"

namespace impress {

struct SearchHit {
    std::string spc_id;
    int chunk_id = 0;
    double distance = 0.0;
    CatalogSource source = CatalogSource::WebSearchFeatures;

    bool operator==(const SearchHit&) const = default;
};

inline double l2_distance(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size())
        throw DimensionMismatch("l2_distance: " + std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()));
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        sum += d * d;
    }
    return std::sqrt(sum);
}

inline double l2_distance(const std::vector<float>& a, const std::vector<float>& b) {
    return l2_distance(std::span<const float>(a), std::span<const float>(b));
}

/// Exact flat Euclidean index over one source's chunk embeddings. Immutable
/// after construction; searches are a full scan with a bounded max-heap and a
/// (distance, spc_id, chunk_id) tie order so results are reproducible.
class FlatL2Index {
public:
    FlatL2Index(CatalogSource source, SourceMatrix matrix)
        : source_(source), matrix_(std::move(matrix)) {
        if (matrix_.dimension <= 0 && !matrix_.rows.empty())
            throw DimensionMismatch("index rows present but dimension is 0");
        if (matrix_.data.size() !=
            matrix_.rows.size() * static_cast<std::size_t>(matrix_.dimension))
            throw DimensionMismatch("matrix data size does not match rows x dimension");
    }

    static FlatL2Index from_store(const CatalogStore& store, CatalogSource source) {
        auto it = store.vectors.find(source);
        if (it == store.vectors.end()) return FlatL2Index(source, SourceMatrix{});
        return FlatL2Index(source, it->second);
    }

    CatalogSource source() const { return source_; }
    int dimension() const { return matrix_.dimension; }
    std::size_t size() const { return matrix_.rows.size(); }
    bool empty() const { return matrix_.rows.empty(); }
    const RowRef& row_meta(std::size_t i) const { return matrix_.rows[i]; }
    std::span<const float> row(std::size_t i) const {
        return {matrix_.row(i), static_cast<std::size_t>(matrix_.dimension)};
    }

    std::vector<SearchHit> search_top_k(std::span<const float> query, int k) const {
        if (k < 1) throw std::invalid_argument("k must be >= 1");
        if (empty()) throw EmptyIndex("search on empty index: " + std::string(to_string(source_)));
        if (static_cast<int>(query.size()) != matrix_.dimension)
            throw DimensionMismatch("query dimension " + std::to_string(query.size()) +
                                    " != index dimension " + std::to_string(matrix_.dimension));

        auto worse = [this](std::size_t a, std::size_t b, double da, double db) {
            if (da != db) return da > db;
            const RowRef& ra = matrix_.rows[a];
            const RowRef& rb = matrix_.rows[b];
            if (ra.spc_id != rb.spc_id) return ra.spc_id > rb.spc_id;
            return ra.chunk_id > rb.chunk_id;
        };

        // (distance, row) max-heap holding the best k seen so far.
        std::vector<std::pair<double, std::size_t>> heap;
        auto heap_cmp = [&](const auto& a, const auto& b) {
            return worse(b.second, a.second, b.first, a.first);
        };
        const std::size_t want = std::min<std::size_t>(static_cast<std::size_t>(k), size());
        for (std::size_t i = 0; i < size(); ++i) {
            double d = l2_distance(row(i), query);
            if (heap.size() < want) {
                heap.emplace_back(d, i);
                std::push_heap(heap.begin(), heap.end(), heap_cmp);
            } else if (worse(heap.front().second, i, heap.front().first, d)) {
                std::pop_heap(heap.begin(), heap.end(), heap_cmp);
                heap.back() = {d, i};
                std::push_heap(heap.begin(), heap.end(), heap_cmp);
            }
        }
        std::sort(heap.begin(), heap.end(),
                  [&](const auto& a, const auto& b) { return worse(b.second, a.second, b.first, a.first); });

        std::vector<SearchHit> hits;
        hits.reserve(heap.size());
        for (const auto& [d, i] : heap) {
            const RowRef& ref = matrix_.rows[i];
            hits.push_back({ref.spc_id, ref.chunk_id, d, source_});
        }
        return hits;
    }

    std::vector<SearchHit> search_top_k(const std::vector<float>& query, int k) const {
        return search_top_k(std::span<const float>(query), k);
    }

private:
    CatalogSource source_;
    SourceMatrix matrix_;
};

}  // namespace impress
