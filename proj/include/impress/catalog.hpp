#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "impress/chunk.hpp"
#include "impress/errors.hpp"
#include "impress/llm.hpp"
#include "impress/spc.hpp"
#include "impress/web_search.hpp"

namespace impress {

inline constexpr int kDefaultMaxChunkTokens = 256;
inline constexpr int kDefaultResultsPerQuery = 5;

/// One catalog entry: the full document for an (SPC, source) pair plus its
/// embedding-ready chunks. `placeholder` marks a floor document written after
/// a per-SPC fetch or generation failure.
struct CatalogDocument {
    std::string spc_id;
    CatalogSource source = CatalogSource::WebSearchFeatures;
    std::string text;
    std::vector<TextChunk> chunks;
    std::vector<std::string> urls;
    bool placeholder = false;

    bool operator==(const CatalogDocument&) const = default;
};

/// spc_id -> document, one map per source.
using DocumentSet = std::map<CatalogSource, std::map<std::string, CatalogDocument>>;

struct BuildIssue {
    std::string spc_id;
    CatalogSource source = CatalogSource::WebSearchFeatures;
    std::string message;
};

/// Non-fatal problems collected while building a catalog. An issue means the
/// affected document is a placeholder, never that the build aborted.
struct BuildReport {
    std::vector<BuildIssue> issues;

    bool clean() const { return issues.empty(); }
    bool mentions(const std::string& spc_id) const {
        return std::any_of(issues.begin(), issues.end(),
                           [&](const BuildIssue& i) { return i.spc_id == spc_id; });
    }
};

struct RowRef {
    std::string spc_id;
    int chunk_id = 0;

    bool operator==(const RowRef&) const = default;
};

/// Row-major float32 matrix of chunk embeddings for one source. Row i of
/// `data` belongs to `rows[i]`.
struct SourceMatrix {
    int dimension = 0;
    std::vector<RowRef> rows;
    std::vector<float> data;

    std::size_t row_count() const { return rows.size(); }
    const float* row(std::size_t i) const { return data.data() + i * static_cast<std::size_t>(dimension); }

    bool operator==(const SourceMatrix&) const = default;
};

/// Immutable bundle of everything retrieval needs: the SPC universe, per-source
/// documents, and per-source embedding matrices.
struct CatalogStore {
    std::vector<SolutionProductCategory> universe;  // sorted by spc_id
    DocumentSet documents;
    std::map<CatalogSource, SourceMatrix> vectors;
    std::string embed_model_id;

    bool operator==(const CatalogStore&) const = default;

    int dimension() const {
        for (const auto& [src, matrix] : vectors)
            if (matrix.dimension > 0) return matrix.dimension;
        return 0;
    }

    bool has_spc(const std::string& spc_id) const { return find(spc_id) != nullptr; }

    const SolutionProductCategory* find(const std::string& spc_id) const {
        auto it = std::lower_bound(universe.begin(), universe.end(), spc_id,
                                   [](const SolutionProductCategory& s, const std::string& id) {
                                       return s.spc_id < id;
                                   });
        if (it == universe.end() || it->spc_id != spc_id) return nullptr;
        return &*it;
    }

    std::string display_name(const std::string& spc_id) const {
        const auto* spc = find(spc_id);
        return spc ? spc->display_name : spc_id;
    }

    const CatalogDocument* document(CatalogSource source, const std::string& spc_id) const {
        auto src_it = documents.find(source);
        if (src_it == documents.end()) return nullptr;
        auto doc_it = src_it->second.find(spc_id);
        if (doc_it == src_it->second.end()) return nullptr;
        return &doc_it->second;
    }

    std::string chunk_text(CatalogSource source, const std::string& spc_id, int chunk_id) const {
        const auto* doc = document(source, spc_id);
        if (!doc) return "";
        for (const auto& chunk : doc->chunks)
            if (chunk.id == chunk_id) return chunk.text;
        return "";
    }
};

namespace detail {

inline CatalogDocument make_document(const std::string& spc_id, CatalogSource source,
                                     std::string text, int max_chunk_tokens,
                                     bool placeholder = false) {
    CatalogDocument doc;
    doc.spc_id = spc_id;
    doc.source = source;
    doc.text = std::move(text);
    doc.chunks = chunk_document(doc.text, max_chunk_tokens);
    doc.placeholder = placeholder;
    return doc;
}

inline CatalogDocument floor_document(const SolutionProductCategory& spc, CatalogSource source,
                                      int max_chunk_tokens) {
    return make_document(spc.spc_id, source, spc.display_name + "\n" + spc.spc_id,
                         max_chunk_tokens, true);
}

inline std::string join(const std::vector<std::string>& parts, const std::string& sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

}  // namespace detail

/// Builds the two web-search documents per SPC: "<name> features" and
/// "<name> use cases" queries, result snippets concatenated as title + content
/// blocks separated by blank lines. Failures and empty result sets degrade to
/// a flagged floor document; they never abort the build.
inline DocumentSet fetch_web_docs(const std::vector<SolutionProductCategory>& spcs,
                                  SearchClient& search_client, BuildReport& report,
                                  int results_per_query = kDefaultResultsPerQuery,
                                  int max_chunk_tokens = kDefaultMaxChunkTokens) {
    if (spcs.empty()) throw std::invalid_argument("spcs must be non-empty");
    const std::pair<CatalogSource, std::string> plans[] = {
        {CatalogSource::WebSearchFeatures, " features"},
        {CatalogSource::WebSearchUseCases, " use cases"},
    };
    DocumentSet docs;
    for (const auto& spc : spcs) {
        for (const auto& [source, suffix] : plans) {
            const std::string query = spc.display_name + suffix;
            std::vector<WebSearchResult> results;
            std::string failure;
            try {
                results = search_client.search(query, results_per_query);
            } catch (const SearchTransportError& e) {
                failure = e.what();
            }
            if (!failure.empty()) {
                report.issues.push_back({spc.spc_id, source, "search failed: " + failure});
                docs[source][spc.spc_id] = detail::floor_document(spc, source, max_chunk_tokens);
                continue;
            }
            if (results.empty()) {
                report.issues.push_back({spc.spc_id, source, "no results for \"" + query + "\""});
                docs[source][spc.spc_id] = detail::floor_document(spc, source, max_chunk_tokens);
                continue;
            }
            std::vector<std::string> blocks;
            std::vector<std::string> urls;
            for (const auto& r : results) {
                std::string block = r.title;
                if (!r.content.empty()) {
                    if (!block.empty()) block += "\n";
                    block += r.content;
                }
                if (!block.empty()) blocks.push_back(std::move(block));
                if (!r.url.empty()) urls.push_back(r.url);
            }
            if (blocks.empty()) {
                report.issues.push_back({spc.spc_id, source, "empty snippets for \"" + query + "\""});
                docs[source][spc.spc_id] = detail::floor_document(spc, source, max_chunk_tokens);
                continue;
            }
            CatalogDocument doc = detail::make_document(spc.spc_id, source,
                                                        detail::join(blocks, "\n\n"),
                                                        max_chunk_tokens);
            doc.urls = std::move(urls);
            docs[source][spc.spc_id] = std::move(doc);
        }
    }
    return docs;
}

inline const char* kCatalogGenTag = "catalog-gen";
inline const char* kCatalogEmbedTag = "catalog-embed";

/// Builds the three generated documents per SPC from one structured LLM call:
/// a description, a feature list, and exactly three use cases. A reply that is
/// still malformed after the gateway's repair retry degrades that SPC to
/// flagged floor documents.
inline DocumentSet generate_catalog_docs(Gateway& gateway, const ModelConfig& config,
                                         const std::vector<SolutionProductCategory>& spcs,
                                         BuildReport& report,
                                         int max_chunk_tokens = kDefaultMaxChunkTokens) {
    if (spcs.empty()) throw std::invalid_argument("spcs must be non-empty");
    const CatalogSource gen_sources[] = {CatalogSource::GenDescriptions,
                                         CatalogSource::GenFeatures,
                                         CatalogSource::GenUseCases};
    Gateway::JsonValidator validator = [](const nlohmann::json& v) -> std::optional<std::string> {
        if (!v.is_object()) return "reply must be a JSON object";
        if (!v.contains("description") || !v["description"].is_string() ||
            v["description"].get<std::string>().empty())
            return "\"description\" must be a non-empty string";
        if (!v.contains("features") || !v["features"].is_array() || v["features"].empty())
            return "\"features\" must be a non-empty list of strings";
        for (const auto& f : v["features"])
            if (!f.is_string() || f.get<std::string>().empty())
                return "\"features\" must contain only non-empty strings";
        if (!v.contains("use_cases") || !v["use_cases"].is_array() || v["use_cases"].size() != 3)
            return "\"use_cases\" must be a list of exactly 3 strings";
        for (const auto& u : v["use_cases"])
            if (!u.is_string() || u.get<std::string>().empty())
                return "\"use_cases\" must contain only non-empty strings";
        return std::nullopt;
    };

    DocumentSet docs;
    for (const auto& spc : spcs) {
        std::vector<ChatMessage> messages = {
            system_message("You write concise product-category knowledge for a support "
                           "recommendation catalog."),
            user_message("Product category: " + spc.display_name +
                         "\n\nReply with exactly one fenced JSON object and nothing else. "
                         "Fields:\n"
                         "- \"description\": a brief description of the category\n"
                         "- \"features\": a list of key feature strings\n"
                         "- \"use_cases\": exactly three example use case strings"),
        };
        JsonCompletion jc = gateway.complete_json(config, messages, kCatalogGenTag, validator);
        if (!jc.ok()) {
            for (CatalogSource source : gen_sources) {
                report.issues.push_back({spc.spc_id, source, "generation failed: " + jc.error});
                docs[source][spc.spc_id] = detail::floor_document(spc, source, max_chunk_tokens);
            }
            continue;
        }
        const nlohmann::json& v = *jc.value;
        std::vector<std::string> features = v["features"].get<std::vector<std::string>>();
        std::vector<std::string> use_cases = v["use_cases"].get<std::vector<std::string>>();
        docs[CatalogSource::GenDescriptions][spc.spc_id] =
            detail::make_document(spc.spc_id, CatalogSource::GenDescriptions,
                                  v["description"].get<std::string>(), max_chunk_tokens);
        docs[CatalogSource::GenFeatures][spc.spc_id] =
            detail::make_document(spc.spc_id, CatalogSource::GenFeatures,
                                  detail::join(features, "\n"), max_chunk_tokens);
        docs[CatalogSource::GenUseCases][spc.spc_id] =
            detail::make_document(spc.spc_id, CatalogSource::GenUseCases,
                                  detail::join(use_cases, "\n\n"), max_chunk_tokens);
    }
    return docs;
}

/// Merges per-source document maps; later sets win on conflicts.
inline DocumentSet merge_document_sets(DocumentSet a, const DocumentSet& b) {
    for (const auto& [source, by_spc] : b)
        for (const auto& [spc_id, doc] : by_spc) a[source][spc_id] = doc;
    return a;
}

/// Embeds every chunk (one batched call per source) and assembles the store.
inline CatalogStore build_store(Gateway& gateway, const ModelConfig& embed_config,
                                std::vector<SolutionProductCategory> universe,
                                DocumentSet documents) {
    std::sort(universe.begin(), universe.end(),
              [](const auto& a, const auto& b) { return a.spc_id < b.spc_id; });
    for (std::size_t i = 0; i < universe.size(); ++i) {
        if (!is_valid_slug(universe[i].spc_id))
            throw ConfigError("invalid spc_id slug: \"" + universe[i].spc_id + "\"");
        if (i && universe[i].spc_id == universe[i - 1].spc_id)
            throw ConfigError("duplicate spc_id: " + universe[i].spc_id);
    }

    CatalogStore store;
    store.universe = std::move(universe);
    store.documents = std::move(documents);
    store.embed_model_id = embed_config.model_id;

    for (const auto& [source, by_spc] : store.documents) {
        std::vector<std::string> texts;
        SourceMatrix matrix;
        for (const auto& [spc_id, doc] : by_spc) {
            for (const auto& chunk : doc.chunks) {
                matrix.rows.push_back({spc_id, chunk.id});
                texts.push_back(chunk.text);
            }
        }
        if (texts.empty()) continue;
        std::vector<EmbeddingResult> embedded =
            gateway.embed_texts(embed_config, texts, kCatalogEmbedTag);
        matrix.dimension = static_cast<int>(embedded.front().dimension);
        if (store.dimension() != 0 && matrix.dimension != store.dimension())
            throw DimensionMismatch("embedding dimension changed across sources");
        matrix.data.reserve(matrix.rows.size() * static_cast<std::size_t>(matrix.dimension));
        for (const auto& e : embedded)
            matrix.data.insert(matrix.data.end(), e.vector.begin(), e.vector.end());
        store.vectors[source] = std::move(matrix);
    }
    return store;
}

namespace detail {

inline void write_f32_le(std::ostream& out, const std::vector<float>& values) {
    for (float v : values) {
        auto bits = std::bit_cast<std::uint32_t>(v);
        char bytes[4] = {static_cast<char>(bits & 0xff), static_cast<char>((bits >> 8) & 0xff),
                         static_cast<char>((bits >> 16) & 0xff),
                         static_cast<char>((bits >> 24) & 0xff)};
        out.write(bytes, 4);
    }
}

inline std::vector<float> read_f32_le(std::istream& in, std::size_t count) {
    std::vector<float> values;
    values.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        unsigned char bytes[4];
        in.read(reinterpret_cast<char*>(bytes), 4);
        if (!in) throw IoError("truncated float32 matrix");
        std::uint32_t bits = static_cast<std::uint32_t>(bytes[0]) |
                             (static_cast<std::uint32_t>(bytes[1]) << 8) |
                             (static_cast<std::uint32_t>(bytes[2]) << 16) |
                             (static_cast<std::uint32_t>(bytes[3]) << 24);
        values.push_back(std::bit_cast<float>(bits));
    }
    return values;
}

inline nlohmann::json load_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("bad JSON in " + path.string() + ": " + e.what());
    }
    return doc;
}

inline void save_json_file(const std::filesystem::path& path, const nlohmann::json& doc) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << doc.dump(2) << "\n";
    if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace detail

/// Directory layout: universe.json, docs/<source>/<spc_id>.json, and per source
/// vectors/<source>.f32bin (little-endian float32, row-major) plus
/// vectors/<source>.meta.json mapping row i to (spc_id, chunk_id).
inline void save_store(const CatalogStore& store, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir / "docs", ec);
    std::filesystem::create_directories(dir / "vectors", ec);
    if (ec) throw IoError("cannot create store directory " + dir.string());

    nlohmann::json universe = nlohmann::json::object();
    universe["embed_model_id"] = store.embed_model_id;
    universe["spcs"] = nlohmann::json::array();
    for (const auto& spc : store.universe)
        universe["spcs"].push_back({{"spc_id", spc.spc_id}, {"display_name", spc.display_name}});
    detail::save_json_file(dir / "universe.json", universe);

    for (const auto& [source, by_spc] : store.documents) {
        std::filesystem::path source_dir = dir / "docs" / to_string(source);
        std::filesystem::create_directories(source_dir, ec);
        if (ec) throw IoError("cannot create " + source_dir.string());
        for (const auto& [spc_id, doc] : by_spc) {
            nlohmann::json j;
            j["spc_id"] = doc.spc_id;
            j["source"] = to_string(doc.source);
            j["text"] = doc.text;
            j["placeholder"] = doc.placeholder;
            j["urls"] = doc.urls;
            j["chunks"] = nlohmann::json::array();
            for (const auto& chunk : doc.chunks)
                j["chunks"].push_back({{"id", chunk.id}, {"text", chunk.text}});
            detail::save_json_file(source_dir / (spc_id + ".json"), j);
        }
    }

    for (const auto& [source, matrix] : store.vectors) {
        std::filesystem::path bin_path = dir / "vectors" / (std::string(to_string(source)) + ".f32bin");
        std::ofstream bin(bin_path, std::ios::binary);
        if (!bin) throw IoError("cannot write " + bin_path.string());
        detail::write_f32_le(bin, matrix.data);
        if (!bin) throw IoError("write failed for " + bin_path.string());

        nlohmann::json meta;
        meta["dimension"] = matrix.dimension;
        meta["rows"] = nlohmann::json::array();
        for (const auto& row : matrix.rows)
            meta["rows"].push_back({{"spc_id", row.spc_id}, {"chunk_id", row.chunk_id}});
        detail::save_json_file(dir / "vectors" / (std::string(to_string(source)) + ".meta.json"),
                               meta);
    }
}

inline CatalogStore load_store(const std::filesystem::path& dir) {
    if (!std::filesystem::exists(dir / "universe.json"))
        throw IoError("not a catalog store (missing universe.json): " + dir.string());
    CatalogStore store;
    nlohmann::json universe = detail::load_json_file(dir / "universe.json");
    store.embed_model_id = universe.value("embed_model_id", "");
    for (const auto& item : universe.value("spcs", nlohmann::json::array()))
        store.universe.push_back({item.at("spc_id").get<std::string>(),
                                  item.at("display_name").get<std::string>()});
    std::sort(store.universe.begin(), store.universe.end(),
              [](const auto& a, const auto& b) { return a.spc_id < b.spc_id; });

    for (CatalogSource source : kAllSources) {
        std::filesystem::path source_dir = dir / "docs" / to_string(source);
        if (std::filesystem::exists(source_dir)) {
            std::vector<std::filesystem::path> files;
            for (const auto& entry : std::filesystem::directory_iterator(source_dir))
                if (entry.path().extension() == ".json") files.push_back(entry.path());
            std::sort(files.begin(), files.end());
            for (const auto& path : files) {
                nlohmann::json j = detail::load_json_file(path);
                CatalogDocument doc;
                doc.spc_id = j.at("spc_id").get<std::string>();
                doc.source = source_from_string(j.at("source").get<std::string>());
                doc.text = j.at("text").get<std::string>();
                doc.placeholder = j.value("placeholder", false);
                doc.urls = j.value("urls", std::vector<std::string>{});
                for (const auto& chunk : j.at("chunks"))
                    doc.chunks.push_back({chunk.at("id").get<int>(),
                                          chunk.at("text").get<std::string>()});
                store.documents[source][doc.spc_id] = std::move(doc);
            }
        }

        std::filesystem::path bin_path = dir / "vectors" / (std::string(to_string(source)) + ".f32bin");
        std::filesystem::path meta_path =
            dir / "vectors" / (std::string(to_string(source)) + ".meta.json");
        if (!std::filesystem::exists(meta_path)) continue;
        nlohmann::json meta = detail::load_json_file(meta_path);
        SourceMatrix matrix;
        matrix.dimension = meta.at("dimension").get<int>();
        for (const auto& row : meta.at("rows"))
            matrix.rows.push_back({row.at("spc_id").get<std::string>(),
                                   row.at("chunk_id").get<int>()});
        std::ifstream bin(bin_path, std::ios::binary);
        if (!bin) throw IoError("cannot open " + bin_path.string());
        matrix.data = detail::read_f32_le(
            bin, matrix.rows.size() * static_cast<std::size_t>(matrix.dimension));
        char extra;
        if (bin.read(&extra, 1))
            throw IoError("trailing bytes in " + bin_path.string());
        store.vectors[source] = std::move(matrix);
    }
    return store;
}

}  // namespace impress
