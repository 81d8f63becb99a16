#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "impress/errors.hpp"
#include "impress/spc.hpp"

namespace impress {

struct WebSearchResult {
    std::string title;
    std::string content;
    std::string url;
};

/// Pluggable web-search interface: query in, ranked results out.
class SearchClient {
public:
    virtual ~SearchClient() = default;
    virtual std::vector<WebSearchResult> search(const std::string& query, int max_results) = 0;
};

/// In-memory scripted client for unit tests.
class ScriptedSearchClient : public SearchClient {
public:
    void script(const std::string& query, std::vector<WebSearchResult> results) {
        responses_[query] = std::move(results);
    }
    void fail_on(const std::string& query) { failures_.insert(query); }

    const std::vector<std::string>& queries_seen() const { return queries_seen_; }

    std::vector<WebSearchResult> search(const std::string& query, int max_results) override {
        queries_seen_.push_back(query);
        if (failures_.count(query)) throw SearchTransportError("scripted search failure: " + query);
        auto it = responses_.find(query);
        if (it == responses_.end()) return {};
        auto results = it->second;
        if (static_cast<int>(results.size()) > max_results)
            results.resize(static_cast<std::size_t>(max_results));
        return results;
    }

private:
    std::map<std::string, std::vector<WebSearchResult>> responses_;
    std::set<std::string> failures_;
    std::vector<std::string> queries_seen_;
};

/// Fixture-directory mock: each query is answered from `<dir>/<slug(query)>.json`,
/// a JSON array of {title, content, url}. A missing file means zero results;
/// a malformed file is a transport error.
class FixtureSearchClient : public SearchClient {
public:
    explicit FixtureSearchClient(std::filesystem::path dir) : dir_(std::move(dir)) {}

    static std::string fixture_name(const std::string& query) { return make_slug(query) + ".json"; }

    std::vector<WebSearchResult> search(const std::string& query, int max_results) override {
        std::filesystem::path path = dir_ / fixture_name(query);
        if (!std::filesystem::exists(path)) return {};
        std::ifstream in(path);
        nlohmann::json doc;
        try {
            in >> doc;
        } catch (const nlohmann::json::exception& e) {
            throw SearchTransportError("bad search fixture " + path.string() + ": " + e.what());
        }
        if (!doc.is_array())
            throw SearchTransportError("search fixture must be a JSON array: " + path.string());
        std::vector<WebSearchResult> results;
        for (const auto& item : doc) {
            if (static_cast<int>(results.size()) >= max_results) break;
            WebSearchResult r;
            r.title = item.value("title", "");
            r.content = item.value("content", "");
            r.url = item.value("url", "");
            results.push_back(std::move(r));
        }
        return results;
    }

private:
    std::filesystem::path dir_;
};

}  // namespace impress
