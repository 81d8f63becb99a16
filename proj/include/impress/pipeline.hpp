#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <future>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "impress/catalog.hpp"
#include "impress/errors.hpp"
#include "impress/flat_index.hpp"
#include "impress/ledger.hpp"
#include "impress/llm.hpp"
#include "impress/rng.hpp"
#include "impress/spc.hpp"

namespace impress {

inline const char* kStep1DiagnosisTag = "step1-diagnosis";
inline const char* kStep1QueryTag = "step1-query";
inline const char* kStep2EmbedTag = "step2-embed";
inline const char* kStep3RankTag = "step3-rank";

struct Utterance {
    Role role = Role::User;
    std::string text;

    bool operator==(const Utterance&) const = default;
};

struct Conversation {
    std::string conversation_id;
    std::string domain_tag;
    std::vector<Utterance> utterances;

    bool operator==(const Conversation&) const = default;
};

/// Fatal problems throw InvalidConversation; soft ones (not starting with the
/// user, repeated roles) come back as warnings.
inline std::vector<std::string> validate_conversation(const Conversation& conversation) {
    if (conversation.conversation_id.empty())
        throw InvalidConversation("conversation_id must be non-empty");
    if (conversation.utterances.empty())
        throw InvalidConversation("conversation must contain at least one utterance");
    for (std::size_t i = 0; i < conversation.utterances.size(); ++i) {
        const Utterance& u = conversation.utterances[i];
        if (u.role != Role::User && u.role != Role::Assistant)
            throw InvalidConversation("utterance " + std::to_string(i) +
                                      ": role must be user or assistant");
        if (detail::trim_copy(u.text).empty())
            throw InvalidConversation("utterance " + std::to_string(i) + ": text must be non-empty");
    }
    std::vector<std::string> warnings;
    if (conversation.utterances.front().role != Role::User)
        warnings.push_back("conversation does not open with a user utterance");
    for (std::size_t i = 1; i < conversation.utterances.size(); ++i)
        if (conversation.utterances[i].role == conversation.utterances[i - 1].role) {
            warnings.push_back("roles do not alternate at utterance " + std::to_string(i));
            break;
        }
    return warnings;
}

struct SummaryDiagnosis {
    std::string summary;
    std::string diagnosis;
    std::vector<std::string> measures;

    bool operator==(const SummaryDiagnosis&) const = default;
};

struct PreliminarySpc {
    std::string name;
    std::string explanation;

    bool operator==(const PreliminarySpc&) const = default;
};

struct GeneratedQuery {
    std::vector<PreliminarySpc> preliminary_spcs;
    bool truncated = false;

    bool operator==(const GeneratedQuery&) const = default;
};

struct ProvenanceHit {
    CatalogSource source = CatalogSource::WebSearchFeatures;
    int entry_ordinal = 0;
    int chunk_id = 0;
    double distance = 0.0;

    bool operator==(const ProvenanceHit&) const = default;
};

struct RetrievedCandidate {
    std::string spc_id;
    std::string display_name;
    double best_distance = 0.0;
    std::string best_chunk_text;
    std::vector<ProvenanceHit> provenance;

    bool operator==(const RetrievedCandidate&) const = default;
};

struct RankingIteration {
    std::uint64_t seed = 0;
    std::vector<std::string> presented_order;
    std::vector<std::string> returned_order;
    bool repaired = false;
    bool fallback = false;

    bool operator==(const RankingIteration&) const = default;
};

struct ScoredSpc {
    std::string spc_id;
    std::int64_t borda_score = 0;
    double best_distance = 0.0;

    bool operator==(const ScoredSpc&) const = default;
};

struct AggregatedRanking {
    std::vector<ScoredSpc> ordered_spcs;
    std::vector<RankingIteration> iterations;

    std::vector<std::string> ranked_ids() const {
        std::vector<std::string> ids;
        ids.reserve(ordered_spcs.size());
        for (const auto& s : ordered_spcs) ids.push_back(s.spc_id);
        return ids;
    }

    bool operator==(const AggregatedRanking&) const = default;
};

struct PipelineOptions {
    int k_per_index = 5;
    int bootstrap_iterations = 3;
    std::uint64_t base_seed = 0;
    int max_preliminary = 8;
    bool concurrent_ranking = true;
    std::vector<CatalogSource> enabled_sources{kAllSources.begin(), kAllSources.end()};
};

// ---------------------------------------------------------------------------
// Prompt construction. Kept as free functions so scripted tests can target the
// exact wire text.

inline const char* kRankingItemPrefix = "- [";

namespace detail {

inline std::string single_line(const std::string& text) {
    std::string out = text;
    for (char& c : out)
        if (c == '\n' || c == '\r' || c == '\t') c = ' ';
    return out;
}

inline std::string render_transcript(const Conversation& conversation) {
    std::string out;
    for (const auto& u : conversation.utterances) {
        out += to_string(u.role);
        out += ": ";
        out += u.text;
        out += "\n";
    }
    return out;
}

}  // namespace detail

inline std::vector<ChatMessage> build_diagnosis_messages(const Conversation& conversation) {
    return {
        system_message("You analyze support conversations. Reply with exactly one fenced JSON "
                       "object and nothing else."),
        user_message("Conversation:\n" + detail::render_transcript(conversation) +
                     "\nSummarize the issue and diagnose its root cause. Fields:\n"
                     "- \"summary\": concise outline of the issue the user raised\n"
                     "- \"diagnosis\": the root cause\n"
                     "- \"measures\": list of plausible measures that could resolve it"),
    };
}

inline std::vector<ChatMessage> build_query_messages(const SummaryDiagnosis& diagnosis) {
    std::string measures;
    for (const auto& m : diagnosis.measures) measures += "- " + m + "\n";
    return {
        system_message("You map a support diagnosis to product categories that could resolve it. "
                       "Reply with exactly one fenced JSON object and nothing else."),
        user_message("Summary: " + diagnosis.summary + "\nDiagnosis: " + diagnosis.diagnosis +
                     "\nMeasures:\n" + measures +
                     "\nList relevant solution product categories. Fields:\n"
                     "- \"preliminary_spcs\": list of {\"name\": category name, "
                     "\"explanation\": why it addresses the diagnosis}"),
    };
}

inline std::vector<ChatMessage> build_ranking_messages(
    const SummaryDiagnosis& diagnosis, const std::vector<std::string>& presented_order,
    const std::map<std::string, const RetrievedCandidate*>& by_id) {
    std::string body = "Diagnosis: " + diagnosis.diagnosis + "\n\nCandidates:\n";
    for (const auto& id : presented_order) {
        const RetrievedCandidate* c = by_id.at(id);
        body += kRankingItemPrefix + id + "] " + c->display_name;
        if (!c->best_chunk_text.empty()) body += ": " + detail::single_line(c->best_chunk_text);
        body += "\n";
    }
    body +=
        "\nRank the candidates by their ability to help resolve the diagnosis, best first. "
        "Reply with exactly one fenced JSON object and nothing else. Fields:\n"
        "- \"ranking\": list containing every candidate id above exactly once";
    return {
        system_message("You rank solution product categories for a support diagnosis."),
        user_message(body),
    };
}

// ---------------------------------------------------------------------------
// Step 1: summary & diagnosis, then preliminary SPCs.

inline SummaryDiagnosis generate_summary_diagnosis(Gateway& gateway, const ModelConfig& config,
                                                   const Conversation& conversation) {
    validate_conversation(conversation);
    Gateway::JsonValidator validator = [](const nlohmann::json& v) -> std::optional<std::string> {
        if (!v.is_object()) return "reply must be a JSON object";
        if (!v.contains("summary") || !v["summary"].is_string() ||
            detail::trim_copy(v["summary"].get<std::string>()).empty())
            return "\"summary\" must be a non-empty string";
        if (!v.contains("diagnosis") || !v["diagnosis"].is_string() ||
            detail::trim_copy(v["diagnosis"].get<std::string>()).empty())
            return "\"diagnosis\" must be a non-empty string";
        if (v.contains("measures")) {
            if (!v["measures"].is_array()) return "\"measures\" must be a list of strings";
            for (const auto& m : v["measures"])
                if (!m.is_string()) return "\"measures\" must be a list of strings";
        }
        return std::nullopt;
    };
    JsonCompletion jc = gateway.complete_json(config, build_diagnosis_messages(conversation),
                                              kStep1DiagnosisTag, validator);
    if (!jc.ok()) throw GenerationParseError("summary/diagnosis generation failed: " + jc.error);
    SummaryDiagnosis out;
    out.summary = (*jc.value)["summary"].get<std::string>();
    out.diagnosis = (*jc.value)["diagnosis"].get<std::string>();
    if (jc.value->contains("measures"))
        out.measures = (*jc.value)["measures"].get<std::vector<std::string>>();
    return out;
}

inline const char* kEmptyQueryMessage = "\"preliminary_spcs\" must contain at least one entry";

inline GeneratedQuery generate_preliminary_spcs(Gateway& gateway, const ModelConfig& config,
                                                const SummaryDiagnosis& diagnosis,
                                                int max_preliminary = 8) {
    if (detail::trim_copy(diagnosis.diagnosis).empty())
        throw std::invalid_argument("diagnosis must be non-empty");
    Gateway::JsonValidator validator = [](const nlohmann::json& v) -> std::optional<std::string> {
        if (!v.is_object() || !v.contains("preliminary_spcs") || !v["preliminary_spcs"].is_array())
            return "reply must be a JSON object with a \"preliminary_spcs\" list";
        if (v["preliminary_spcs"].empty()) return kEmptyQueryMessage;
        for (const auto& entry : v["preliminary_spcs"]) {
            if (!entry.is_object() || !entry.contains("name") || !entry["name"].is_string() ||
                detail::trim_copy(entry["name"].get<std::string>()).empty())
                return "every entry needs a non-empty \"name\"";
            if (!entry.contains("explanation") || !entry["explanation"].is_string() ||
                detail::trim_copy(entry["explanation"].get<std::string>()).empty())
                return "every entry needs a non-empty \"explanation\"";
        }
        return std::nullopt;
    };
    JsonCompletion jc = gateway.complete_json(config, build_query_messages(diagnosis),
                                              kStep1QueryTag, validator);
    if (!jc.ok()) {
        if (jc.error.find(kEmptyQueryMessage) != std::string::npos)
            throw EmptyQuery("no preliminary SPCs after repair retry");
        throw GenerationParseError("preliminary SPC generation failed: " + jc.error);
    }
    GeneratedQuery query;
    for (const auto& entry : (*jc.value)["preliminary_spcs"])
        query.preliminary_spcs.push_back({entry["name"].get<std::string>(),
                                          entry["explanation"].get<std::string>()});
    if (static_cast<int>(query.preliminary_spcs.size()) > max_preliminary) {
        query.preliminary_spcs.resize(static_cast<std::size_t>(max_preliminary));
        query.truncated = true;
    }
    return query;
}

// ---------------------------------------------------------------------------
// Step 2: embed each preliminary entry and union per-index top-k hits.

inline std::string embedding_text(const PreliminarySpc& entry) {
    return entry.name + ": " + entry.explanation;
}

inline std::vector<RetrievedCandidate> retrieve_candidates(
    Gateway& gateway, const ModelConfig& embed_config, const GeneratedQuery& query,
    const std::vector<FlatL2Index>& indexes, const CatalogStore& store, int k_per_index = 5) {
    if (query.preliminary_spcs.empty()) throw std::invalid_argument("query has no entries");
    if (indexes.empty()) throw std::invalid_argument("at least one index must be enabled");
    if (k_per_index < 1) throw std::invalid_argument("k_per_index must be >= 1");

    std::vector<std::string> texts;
    texts.reserve(query.preliminary_spcs.size());
    for (const auto& entry : query.preliminary_spcs) texts.push_back(embedding_text(entry));
    std::vector<EmbeddingResult> embedded = gateway.embed_texts(embed_config, texts, kStep2EmbedTag);

    std::map<std::string, RetrievedCandidate> merged;
    for (std::size_t e = 0; e < embedded.size(); ++e) {
        for (const auto& index : indexes) {
            if (index.empty()) continue;
            for (const SearchHit& hit : index.search_top_k(embedded[e].vector, k_per_index)) {
                auto [it, inserted] = merged.try_emplace(hit.spc_id);
                RetrievedCandidate& c = it->second;
                if (inserted) {
                    c.spc_id = hit.spc_id;
                    c.display_name = store.display_name(hit.spc_id);
                    c.best_distance = hit.distance;
                    c.best_chunk_text = store.chunk_text(hit.source, hit.spc_id, hit.chunk_id);
                } else if (hit.distance < c.best_distance) {
                    c.best_distance = hit.distance;
                    c.best_chunk_text = store.chunk_text(hit.source, hit.spc_id, hit.chunk_id);
                }
                c.provenance.push_back(
                    {hit.source, static_cast<int>(e), hit.chunk_id, hit.distance});
            }
        }
    }

    std::vector<RetrievedCandidate> out;
    out.reserve(merged.size());
    for (auto& [_, candidate] : merged) out.push_back(std::move(candidate));
    std::sort(out.begin(), out.end(), [](const RetrievedCandidate& a, const RetrievedCandidate& b) {
        if (a.best_distance != b.best_distance) return a.best_distance < b.best_distance;
        return a.spc_id < b.spc_id;
    });
    return out;
}

// ---------------------------------------------------------------------------
// Step 3: seeded shuffle, one ranking call per iteration, Borda aggregation.

/// Drops ids outside the presented set, removes duplicates, appends anything
/// missing in presented order. Returns the cleaned list and whether anything
/// had to change.
inline std::pair<std::vector<std::string>, bool> apply_ranking_repair(
    const std::vector<std::string>& returned, const std::vector<std::string>& presented) {
    std::set<std::string> known(presented.begin(), presented.end());
    std::vector<std::string> cleaned;
    std::set<std::string> seen;
    for (const auto& id : returned) {
        if (!known.count(id)) continue;
        if (!seen.insert(id).second) continue;
        cleaned.push_back(id);
    }
    for (const auto& id : presented)
        if (!seen.count(id)) {
            cleaned.push_back(id);
            seen.insert(id);
        }
    bool repaired = cleaned != returned;
    return {cleaned, repaired};
}

inline RankingIteration rank_iteration(Gateway& gateway, const ModelConfig& config,
                                       const SummaryDiagnosis& diagnosis,
                                       const std::vector<RetrievedCandidate>& candidates,
                                       std::uint64_t seed) {
    if (candidates.empty()) throw std::invalid_argument("rank_iteration needs >= 1 candidate");

    RankingIteration iteration;
    iteration.seed = seed;

    std::map<std::string, const RetrievedCandidate*> by_id;
    for (const auto& c : candidates) by_id[c.spc_id] = &c;
    std::vector<std::string> presented;
    presented.reserve(by_id.size());
    for (const auto& [id, _] : by_id) presented.push_back(id);
    Rng rng(seed);
    rng.shuffle(presented);
    iteration.presented_order = presented;

    if (presented.size() == 1) {
        iteration.returned_order = presented;
        return iteration;
    }

    Gateway::JsonValidator validator = [](const nlohmann::json& v) -> std::optional<std::string> {
        if (!v.is_object() || !v.contains("ranking") || !v["ranking"].is_array() ||
            v["ranking"].empty())
            return "reply must be a JSON object with a non-empty \"ranking\" list";
        for (const auto& id : v["ranking"])
            if (!id.is_string()) return "\"ranking\" must contain only id strings";
        return std::nullopt;
    };
    JsonCompletion jc = gateway.complete_json(
        config, build_ranking_messages(diagnosis, presented, by_id), kStep3RankTag, validator);
    if (!jc.ok()) {
        iteration.returned_order = presented;
        iteration.repaired = true;
        iteration.fallback = true;
        return iteration;
    }
    std::vector<std::string> returned = (*jc.value)["ranking"].get<std::vector<std::string>>();
    auto [cleaned, repaired] = apply_ranking_repair(returned, presented);
    iteration.returned_order = std::move(cleaned);
    iteration.repaired = repaired;
    return iteration;
}

/// Borda aggregation: in an iteration ranking m candidates, 1-based rank r
/// earns m - r points. Ties broken by retrieval distance, then id.
inline AggregatedRanking aggregate_borda(const std::vector<RankingIteration>& iterations,
                                         const std::vector<RetrievedCandidate>& candidates) {
    std::map<std::string, ScoredSpc> scores;
    for (const auto& c : candidates) scores[c.spc_id] = {c.spc_id, 0, c.best_distance};
    for (const auto& iteration : iterations) {
        const auto m = static_cast<std::int64_t>(iteration.returned_order.size());
        for (std::int64_t r = 1; r <= m; ++r) {
            auto it = scores.find(iteration.returned_order[static_cast<std::size_t>(r - 1)]);
            if (it != scores.end()) it->second.borda_score += m - r;
        }
    }
    AggregatedRanking out;
    out.iterations = iterations;
    for (const auto& [_, scored] : scores) out.ordered_spcs.push_back(scored);
    std::sort(out.ordered_spcs.begin(), out.ordered_spcs.end(),
              [](const ScoredSpc& a, const ScoredSpc& b) {
                  if (a.borda_score != b.borda_score) return a.borda_score > b.borda_score;
                  if (a.best_distance != b.best_distance) return a.best_distance < b.best_distance;
                  return a.spc_id < b.spc_id;
              });
    return out;
}

inline AggregatedRanking bootstrap_rank(Gateway& gateway, const ModelConfig& config,
                                        const SummaryDiagnosis& diagnosis,
                                        const std::vector<RetrievedCandidate>& candidates,
                                        int iterations, std::uint64_t base_seed,
                                        bool concurrent = true) {
    if (iterations < 0) throw std::invalid_argument("iterations must be >= 0");
    if (candidates.empty()) throw std::invalid_argument("bootstrap_rank needs >= 1 candidate");

    if (iterations == 0) {
        AggregatedRanking out;
        for (const auto& c : candidates) out.ordered_spcs.push_back({c.spc_id, 0, c.best_distance});
        std::sort(out.ordered_spcs.begin(), out.ordered_spcs.end(),
                  [](const ScoredSpc& a, const ScoredSpc& b) {
                      if (a.best_distance != b.best_distance) return a.best_distance < b.best_distance;
                      return a.spc_id < b.spc_id;
                  });
        return out;
    }

    std::vector<RankingIteration> runs(static_cast<std::size_t>(iterations));
    if (concurrent && iterations > 1) {
        std::vector<std::future<RankingIteration>> futures;
        futures.reserve(runs.size());
        for (int i = 0; i < iterations; ++i)
            futures.push_back(std::async(std::launch::async, [&, i] {
                return rank_iteration(gateway, config, diagnosis, candidates,
                                      base_seed + static_cast<std::uint64_t>(i));
            }));
        for (int i = 0; i < iterations; ++i) runs[static_cast<std::size_t>(i)] = futures[static_cast<std::size_t>(i)].get();
    } else {
        for (int i = 0; i < iterations; ++i)
            runs[static_cast<std::size_t>(i)] = rank_iteration(
                gateway, config, diagnosis, candidates, base_seed + static_cast<std::uint64_t>(i));
    }
    return aggregate_borda(runs, candidates);
}

// ---------------------------------------------------------------------------
// The assembled pipeline.

/// Stable 16-hex-digit hash over everything that shapes recommendation output:
/// model settings, pipeline options, enabled sources. Paths and transport
/// details stay out so the same logical setup fingerprints identically
/// anywhere.
inline std::string pipeline_fingerprint(const ModelConfig& chat_config,
                                        const ModelConfig& embed_config,
                                        const PipelineOptions& options) {
    nlohmann::json reduced;
    reduced["chat_model"] = chat_config.model_id;
    reduced["chat_temperature"] = chat_config.temperature;
    reduced["chat_max_output_tokens"] = chat_config.max_output_tokens;
    reduced["embed_model"] = embed_config.model_id;
    reduced["k_per_index"] = options.k_per_index;
    reduced["bootstrap_iterations"] = options.bootstrap_iterations;
    reduced["base_seed"] = options.base_seed;
    reduced["max_preliminary"] = options.max_preliminary;
    auto sources = nlohmann::json::array();
    for (CatalogSource source : options.enabled_sources) sources.push_back(to_string(source));
    reduced["enabled_sources"] = sources;
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(reduced.dump())));
    return buf;
}

struct RecommendResult {
    std::string conversation_id;
    std::vector<std::string> warnings;
    SummaryDiagnosis diagnosis;
    GeneratedQuery query;
    std::vector<RetrievedCandidate> candidates;
    AggregatedRanking ranking;
    std::vector<LedgerEntry> step_deltas;

    std::vector<std::string> ranked_ids() const { return ranking.ranked_ids(); }

    TokenUsage total_usage() const {
        TokenUsage total;
        for (const auto& entry : step_deltas) total += entry.usage;
        return total;
    }

    double total_ms() const {
        double total = 0.0;
        for (const auto& entry : step_deltas)
            for (double ms : entry.latencies_ms) total += ms;
        return total;
    }
};

namespace detail {

template <typename Fn>
auto run_step(const char* step, Fn&& fn) -> decltype(fn()) {
    auto prefixed = [&](const auto& e) { return std::string(step) + ": " + e.what(); };
    try {
        return fn();
    } catch (const GenerationParseError& e) {
        throw GenerationParseError(prefixed(e));
    } catch (const EmptyQuery& e) {
        throw EmptyQuery(prefixed(e));
    } catch (const NoCandidates& e) {
        throw NoCandidates(prefixed(e));
    } catch (const BackendRefusal& e) {
        throw BackendRefusal(prefixed(e));
    } catch (const AuthError& e) {
        throw AuthError(prefixed(e));
    } catch (const TransportError& e) {
        throw TransportError(prefixed(e));
    } catch (const DimensionMismatch& e) {
        throw DimensionMismatch(prefixed(e));
    } catch (const EmptyIndex& e) {
        throw EmptyIndex(prefixed(e));
    }
}

}  // namespace detail

/// Immutable composition of the three steps over one catalog store. Safe to
/// share across concurrent recommend calls.
class Pipeline {
public:
    Pipeline(std::shared_ptr<Gateway> gateway, std::shared_ptr<const CatalogStore> store,
             ModelConfig chat_config, ModelConfig embed_config, PipelineOptions options = {})
        : gateway_(std::move(gateway)),
          store_(std::move(store)),
          chat_config_(std::move(chat_config)),
          embed_config_(std::move(embed_config)),
          options_(std::move(options)) {
        if (!gateway_) throw std::invalid_argument("gateway must not be null");
        if (!store_) throw std::invalid_argument("store must not be null");
        if (options_.enabled_sources.empty())
            throw ConfigError("at least one catalog source must be enabled");
        for (CatalogSource source : options_.enabled_sources)
            indexes_.push_back(FlatL2Index::from_store(*store_, source));
    }

    const PipelineOptions& options() const { return options_; }
    const CatalogStore& store() const { return *store_; }
    Gateway& gateway() const { return *gateway_; }
    const ModelConfig& chat_config() const { return chat_config_; }
    const ModelConfig& embed_config() const { return embed_config_; }
    std::string fingerprint() const {
        return pipeline_fingerprint(chat_config_, embed_config_, options_);
    }

    RecommendResult recommend(const Conversation& conversation) const {
        RecommendResult result;
        result.conversation_id = conversation.conversation_id;
        result.warnings = validate_conversation(conversation);

        const std::vector<LedgerEntry> before = gateway_->snapshot_ledger();

        result.diagnosis = detail::run_step(kStep1DiagnosisTag, [&] {
            return generate_summary_diagnosis(*gateway_, chat_config_, conversation);
        });
        result.query = detail::run_step(kStep1QueryTag, [&] {
            return generate_preliminary_spcs(*gateway_, chat_config_, result.diagnosis,
                                             options_.max_preliminary);
        });
        result.candidates = detail::run_step(kStep2EmbedTag, [&] {
            auto candidates = retrieve_candidates(*gateway_, embed_config_, result.query, indexes_,
                                                  *store_, options_.k_per_index);
            if (candidates.empty())
                throw NoCandidates("retrieval produced no candidates (empty enabled indexes)");
            return candidates;
        });
        result.ranking = detail::run_step(kStep3RankTag, [&] {
            return bootstrap_rank(*gateway_, chat_config_, result.diagnosis, result.candidates,
                                  options_.bootstrap_iterations, options_.base_seed,
                                  options_.concurrent_ranking);
        });

        result.step_deltas = ledger_delta(before, gateway_->snapshot_ledger());
        return result;
    }

private:
    std::shared_ptr<Gateway> gateway_;
    std::shared_ptr<const CatalogStore> store_;
    ModelConfig chat_config_;
    ModelConfig embed_config_;
    PipelineOptions options_;
    std::vector<FlatL2Index> indexes_;
};

}  // namespace impress
