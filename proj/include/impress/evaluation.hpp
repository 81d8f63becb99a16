#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "impress/dataset.hpp"
#include "impress/errors.hpp"
#include "impress/ledger.hpp"
#include "impress/metrics.hpp"
#include "impress/pipeline.hpp"

namespace impress {

struct MetricReport {
    std::string label;
    std::string dataset_id;
    std::string fingerprint;
    int n_conversations = 0;
    int n_failures = 0;
    std::map<int, double> mrr_at;
    std::map<int, double> recall_at;

    bool operator==(const MetricReport&) const = default;
};

/// Per-conversation result kept alongside the aggregate so overhead reports
/// and failure forensics never need a second run.
struct ConversationOutcome {
    std::string conversation_id;
    bool failed = false;
    std::string error;
    RecommendResult result;
    std::map<int, double> mrr_at;
    std::map<int, double> recall_at;
};

struct DatasetEvaluation {
    MetricReport report;
    std::vector<ConversationOutcome> outcomes;
};

namespace detail {

inline std::vector<int> normalize_ks(std::vector<int> ks) {
    if (ks.empty()) throw std::invalid_argument("ks must be non-empty");
    for (int k : ks)
        if (k < 1) throw std::invalid_argument("every k must be >= 1");
    std::sort(ks.begin(), ks.end());
    ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
    return ks;
}

inline void validate_gold_against_store(const std::vector<LabeledConversation>& dataset,
                                        const CatalogStore& store) {
    for (const auto& item : dataset) {
        if (item.gold_spcs.empty())
            throw ConfigError("conversation " + item.conversation.conversation_id +
                              " has no gold_spcs");
        for (const auto& gold : item.gold_spcs)
            if (!store.has_spc(gold))
                throw ConfigError("conversation " + item.conversation.conversation_id +
                                  ": gold spc \"" + gold + "\" is not in the catalog universe");
    }
}

}  // namespace detail

/// Runs recommend over every conversation and averages per-conversation
/// metrics. A failed conversation scores 0 at every k and bumps n_failures;
/// it never drops out of the mean.
inline DatasetEvaluation evaluate_dataset(const Pipeline& pipeline,
                                          const std::vector<LabeledConversation>& dataset,
                                          std::vector<int> ks, const std::string& dataset_id,
                                          const std::string& label = "all-dbs") {
    if (dataset.empty()) throw std::invalid_argument("dataset must be non-empty");
    ks = detail::normalize_ks(std::move(ks));
    detail::validate_gold_against_store(dataset, pipeline.store());

    DatasetEvaluation eval;
    eval.report.label = label;
    eval.report.dataset_id = dataset_id;
    eval.report.fingerprint = pipeline.fingerprint();
    eval.report.n_conversations = static_cast<int>(dataset.size());
    for (int k : ks) {
        eval.report.mrr_at[k] = 0.0;
        eval.report.recall_at[k] = 0.0;
    }

    for (const auto& item : dataset) {
        ConversationOutcome outcome;
        outcome.conversation_id = item.conversation.conversation_id;
        try {
            outcome.result = pipeline.recommend(item.conversation);
            std::vector<std::string> ranked = outcome.result.ranked_ids();
            for (int k : ks) {
                outcome.mrr_at[k] = mrr_at_k(ranked, item.gold_spcs, k);
                outcome.recall_at[k] = recall_at_k(ranked, item.gold_spcs, k);
            }
        } catch (const Error& e) {
            outcome.failed = true;
            outcome.error = e.what();
            for (int k : ks) {
                outcome.mrr_at[k] = 0.0;
                outcome.recall_at[k] = 0.0;
            }
            eval.report.n_failures += 1;
        }
        for (int k : ks) {
            eval.report.mrr_at[k] += outcome.mrr_at[k];
            eval.report.recall_at[k] += outcome.recall_at[k];
        }
        eval.outcomes.push_back(std::move(outcome));
    }

    const double n = static_cast<double>(dataset.size());
    for (int k : ks) {
        eval.report.mrr_at[k] /= n;
        eval.report.recall_at[k] /= n;
    }
    return eval;
}

/// Evaluates on prefixes: row t scores every conversation truncated to its
/// first min(t, length) utterances, for t = 1..longest conversation. The
/// input dataset is never mutated.
inline std::vector<DatasetEvaluation> length_sensitivity_sweep(
    const Pipeline& pipeline, const std::vector<LabeledConversation>& dataset,
    const std::vector<int>& ks, const std::string& dataset_id) {
    if (dataset.empty()) throw std::invalid_argument("dataset must be non-empty");
    std::size_t max_len = 0;
    for (const auto& item : dataset)
        max_len = std::max(max_len, item.conversation.utterances.size());

    std::vector<DatasetEvaluation> rows;
    for (std::size_t t = 1; t <= max_len; ++t) {
        std::vector<LabeledConversation> truncated = dataset;
        for (auto& item : truncated)
            if (item.conversation.utterances.size() > t)
                item.conversation.utterances.resize(t);
        rows.push_back(evaluate_dataset(pipeline, truncated, ks, dataset_id,
                                        "t=" + std::to_string(t)));
    }
    return rows;
}

/// The 11 catalog-DB configurations: all five sources, each source alone, and
/// each source left out.
inline std::vector<PipelineOptions> db_ablation_configs(const PipelineOptions& base) {
    std::vector<PipelineOptions> configs;
    PipelineOptions all = base;
    all.enabled_sources.assign(kAllSources.begin(), kAllSources.end());
    configs.push_back(all);
    for (CatalogSource only : kAllSources) {
        PipelineOptions opt = base;
        opt.enabled_sources = {only};
        configs.push_back(opt);
    }
    for (CatalogSource except : kAllSources) {
        PipelineOptions opt = base;
        opt.enabled_sources.clear();
        for (CatalogSource source : kAllSources)
            if (source != except) opt.enabled_sources.push_back(source);
        configs.push_back(opt);
    }
    return configs;
}

inline std::string db_ablation_label(const PipelineOptions& opt) {
    if (opt.enabled_sources.size() == kAllSources.size()) return "all-dbs";
    if (opt.enabled_sources.size() == 1)
        return std::string("only:") + to_string(opt.enabled_sources.front());
    for (CatalogSource source : kAllSources) {
        if (std::find(opt.enabled_sources.begin(), opt.enabled_sources.end(), source) ==
            opt.enabled_sources.end())
            return std::string("except:") + to_string(source);
    }
    return "custom";
}

inline std::vector<DatasetEvaluation> run_db_ablation(
    std::shared_ptr<Gateway> gateway, std::shared_ptr<const CatalogStore> store,
    const ModelConfig& chat_config, const ModelConfig& embed_config, const PipelineOptions& base,
    const std::vector<LabeledConversation>& dataset, const std::vector<int>& ks,
    const std::string& dataset_id) {
    std::vector<DatasetEvaluation> rows;
    for (const PipelineOptions& opt : db_ablation_configs(base)) {
        Pipeline pipeline(gateway, store, chat_config, embed_config, opt);
        rows.push_back(evaluate_dataset(pipeline, dataset, ks, dataset_id, db_ablation_label(opt)));
    }
    return rows;
}

/// One row per bootstrap iteration count 0..3; row 0 is pure retrieval order.
inline std::vector<DatasetEvaluation> run_bootstrap_ablation(
    std::shared_ptr<Gateway> gateway, std::shared_ptr<const CatalogStore> store,
    const ModelConfig& chat_config, const ModelConfig& embed_config, const PipelineOptions& base,
    const std::vector<LabeledConversation>& dataset, const std::vector<int>& ks,
    const std::string& dataset_id) {
    std::vector<DatasetEvaluation> rows;
    for (int iterations = 0; iterations <= 3; ++iterations) {
        PipelineOptions opt = base;
        opt.bootstrap_iterations = iterations;
        Pipeline pipeline(gateway, store, chat_config, embed_config, opt);
        rows.push_back(evaluate_dataset(pipeline, dataset, ks, dataset_id,
                                        "iterations=" + std::to_string(iterations)));
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Overhead aggregation (token and latency cost per pipeline step).

struct OverheadRow {
    std::string step;
    std::int64_t call_count = 0;
    TokenUsage tokens;
    double total_ms = 0.0;
    LatencyQuartiles quartiles;
};

struct OverheadReport {
    int n_conversations = 0;
    std::vector<OverheadRow> rows;  // sorted by step tag
    TokenUsage total_tokens;

    const OverheadRow* find(const std::string& step) const {
        for (const auto& row : rows)
            if (row.step == step) return &row;
        return nullptr;
    }
};

/// Sums per-step ledger deltas across conversation traces. Failed outcomes
/// contribute whatever they recorded before failing.
inline OverheadReport measure_overhead(const std::vector<ConversationOutcome>& outcomes) {
    std::map<std::string, std::pair<LedgerEntry, double>> merged;
    for (const auto& outcome : outcomes) {
        for (const LedgerEntry& delta : outcome.result.step_deltas) {
            auto& [entry, total_ms] = merged[delta.tag];
            entry.tag = delta.tag;
            entry.call_count += delta.call_count;
            entry.usage += delta.usage;
            entry.latencies_ms.insert(entry.latencies_ms.end(), delta.latencies_ms.begin(),
                                      delta.latencies_ms.end());
            for (double ms : delta.latencies_ms) total_ms += ms;
        }
    }
    OverheadReport report;
    report.n_conversations = static_cast<int>(outcomes.size());
    for (const auto& [tag, pair] : merged) {
        const auto& [entry, total_ms] = pair;
        OverheadRow row;
        row.step = tag;
        row.call_count = entry.call_count;
        row.tokens = entry.usage;
        row.total_ms = total_ms;
        row.quartiles = entry.quartiles();
        report.total_tokens += entry.usage;
        report.rows.push_back(std::move(row));
    }
    return report;
}

// ---------------------------------------------------------------------------
// Report emission. CSV doubles use %.17g so a re-parse reproduces the exact
// in-memory value.

namespace detail {

inline std::string format_double(double value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    return out;
}

}  // namespace detail

inline void write_metric_reports_csv(const std::filesystem::path& path,
                                     const std::vector<MetricReport>& reports) {
    std::ofstream out = detail::open_out(path);
    out << "label,dataset_id,fingerprint,n_conversations,n_failures,metric,k,value\n";
    for (const auto& report : reports) {
        auto emit = [&](const char* metric, const std::map<int, double>& values) {
            for (const auto& [k, value] : values)
                out << report.label << "," << report.dataset_id << "," << report.fingerprint << ","
                    << report.n_conversations << "," << report.n_failures << "," << metric << ","
                    << k << "," << detail::format_double(value) << "\n";
        };
        emit("mrr", report.mrr_at);
        emit("recall", report.recall_at);
    }
    if (!out) throw IoError("write failed for " + path.string());
}

inline std::vector<MetricReport> read_metric_reports_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw IoError("empty report csv " + path.string());
    std::map<std::string, MetricReport> by_label;
    std::vector<std::string> order;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::size_t pos = 0;
        while (true) {
            std::size_t comma = line.find(',', pos);
            if (comma == std::string::npos) {
                fields.push_back(line.substr(pos));
                break;
            }
            fields.push_back(line.substr(pos, comma - pos));
            pos = comma + 1;
        }
        if (fields.size() != 8) throw IoError("bad report row in " + path.string());
        MetricReport& report = by_label[fields[0]];
        if (report.label.empty()) {
            report.label = fields[0];
            report.dataset_id = fields[1];
            report.fingerprint = fields[2];
            report.n_conversations = std::stoi(fields[3]);
            report.n_failures = std::stoi(fields[4]);
            order.push_back(fields[0]);
        }
        int k = std::stoi(fields[6]);
        double value = std::strtod(fields[7].c_str(), nullptr);
        if (fields[5] == "mrr") report.mrr_at[k] = value;
        else if (fields[5] == "recall") report.recall_at[k] = value;
        else throw IoError("unknown metric \"" + fields[5] + "\" in " + path.string());
    }
    std::vector<MetricReport> reports;
    for (const auto& label : order) reports.push_back(by_label[label]);
    return reports;
}

inline void write_metric_reports_text(const std::filesystem::path& path,
                                      const std::vector<MetricReport>& reports) {
    std::ofstream out = detail::open_out(path);
    std::set<int> ks;
    for (const auto& report : reports)
        for (const auto& [k, _] : report.mrr_at) ks.insert(k);

    std::size_t label_width = 5;
    for (const auto& report : reports) label_width = std::max(label_width, report.label.size());

    auto pad = [](std::string s, std::size_t width) {
        if (s.size() < width) s.append(width - s.size(), ' ');
        return s;
    };
    out << pad("label", label_width) << "  conv  fail";
    for (int k : ks) out << "  " << pad("mrr@" + std::to_string(k), 8);
    for (int k : ks) out << "  " << pad("r@" + std::to_string(k), 8);
    out << "\n";
    for (const auto& report : reports) {
        char buf[32];
        out << pad(report.label, label_width);
        std::snprintf(buf, sizeof buf, "  %4d  %4d", report.n_conversations, report.n_failures);
        out << buf;
        auto cell = [&](const std::map<int, double>& values, int k) {
            auto it = values.find(k);
            if (it == values.end()) return std::string("  ") + pad("-", 8);
            std::snprintf(buf, sizeof buf, "%.4f", it->second);
            return std::string("  ") + pad(buf, 8);
        };
        for (int k : ks) out << cell(report.mrr_at, k);
        for (int k : ks) out << cell(report.recall_at, k);
        out << "\n";
    }
    if (!out) throw IoError("write failed for " + path.string());
}

inline void write_overhead_csv(const std::filesystem::path& path, const OverheadReport& report) {
    std::ofstream out = detail::open_out(path);
    out << "step,calls,prompt_tokens,completion_tokens,total_ms,q1_ms,median_ms,q3_ms\n";
    for (const auto& row : report.rows)
        out << row.step << "," << row.call_count << "," << row.tokens.prompt_tokens << ","
            << row.tokens.completion_tokens << "," << detail::format_double(row.total_ms) << ","
            << detail::format_double(row.quartiles.q1) << ","
            << detail::format_double(row.quartiles.median) << ","
            << detail::format_double(row.quartiles.q3) << "\n";
    if (!out) throw IoError("write failed for " + path.string());
}

inline void write_overhead_text(const std::filesystem::path& path, const OverheadReport& report) {
    std::ofstream out = detail::open_out(path);
    out << "conversations: " << report.n_conversations << "\n";
    out << "total tokens: " << report.total_tokens.prompt_tokens << " prompt, "
        << report.total_tokens.completion_tokens << " completion\n\n";
    out << "step              calls  prompt  compl   total_ms  q1/med/q3 ms\n";
    for (const auto& row : report.rows) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%-16s  %5lld  %6lld  %5lld  %9.2f  %.2f/%.2f/%.2f\n",
                      row.step.c_str(), static_cast<long long>(row.call_count),
                      static_cast<long long>(row.tokens.prompt_tokens),
                      static_cast<long long>(row.tokens.completion_tokens), row.total_ms,
                      row.quartiles.q1, row.quartiles.median, row.quartiles.q3);
        out << buf;
    }
    if (!out) throw IoError("write failed for " + path.string());
}

/// Plot-friendly long format: one row per (x, metric, k).
inline void write_plotdata_csv(const std::filesystem::path& path, const std::string& x_name,
                               const std::vector<std::pair<double, const MetricReport*>>& points) {
    std::ofstream out = detail::open_out(path);
    out << x_name << ",metric,k,value\n";
    for (const auto& [x, report] : points) {
        for (const auto& [k, value] : report->mrr_at)
            out << detail::format_double(x) << ",mrr," << k << "," << detail::format_double(value)
                << "\n";
        for (const auto& [k, value] : report->recall_at)
            out << detail::format_double(x) << ",recall," << k << ","
                << detail::format_double(value) << "\n";
    }
    if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace impress
