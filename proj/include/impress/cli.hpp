#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "impress/catalog.hpp"
#include "impress/config.hpp"
#include "impress/dataset.hpp"
#include "impress/errors.hpp"
#include "impress/evaluation.hpp"
#include "impress/fixtures.hpp"
#include "impress/http_clients.hpp"
#include "impress/llm.hpp"
#include "impress/pipeline.hpp"
#include "impress/service.hpp"
#include "impress/simgen.hpp"
#include "impress/web_search.hpp"

namespace impress::cli {

/// Everything a subcommand needs: merged config plus backend handles. Mock
/// mode swaps in scripted/hash backends so every command runs offline.
struct Runtime {
    AppConfig config;
    std::shared_ptr<Gateway> gateway;
    std::unique_ptr<SearchClient> search;
};

struct CommonFlags {
    std::string config_path;
    std::string catalog_dir;
    std::string report_dir;
    std::string fixtures_path;
    bool mock = false;
    std::optional<std::uint64_t> seed;
};

namespace detail {

inline void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "App config JSON file");
    cmd->add_option("--catalog", flags.catalog_dir, "Catalog store directory");
    cmd->add_option("--report-dir", flags.report_dir, "Directory for report output");
    cmd->add_flag("--mock", flags.mock, "Route all backend traffic to fixture scripts");
    cmd->add_option("--fixtures", flags.fixtures_path, "Mock fixtures JSON file");
    cmd->add_option("--seed", flags.seed, "Base seed for all randomness");
}

inline AppConfig merge_config(const CommonFlags& flags) {
    AppConfig config;
    if (!flags.config_path.empty()) config = load_app_config(flags.config_path);
    if (!flags.catalog_dir.empty()) config.catalog_dir = flags.catalog_dir;
    if (!flags.report_dir.empty()) config.report_dir = flags.report_dir;
    if (!flags.fixtures_path.empty()) config.fixtures_path = flags.fixtures_path;
    if (flags.mock) config.mock_mode = true;
    if (flags.seed) config.pipeline.base_seed = *flags.seed;
    return config;
}

inline Runtime make_runtime(AppConfig config) {
    Runtime runtime;
    if (config.mock_mode) {
        if (config.fixtures_path.empty())
            throw ConfigError("mock mode needs a fixtures file (--fixtures or mock.fixtures)");
        MockFixtures fixtures = load_mock_fixtures(config.fixtures_path);
        if (!fixtures.search_fixtures_dir.empty())
            runtime.search = std::make_unique<FixtureSearchClient>(fixtures.search_fixtures_dir);
        RetryPolicy policy;
        policy.base_delay_ms = 0;
        runtime.gateway = std::make_shared<Gateway>(fixtures.chat, fixtures.embed, policy);
    } else {
        if (!config.search_endpoint.empty())
            runtime.search = std::make_unique<HttpSearchClient>(config.search_endpoint,
                                                                config.search_api_key_ref);
        runtime.gateway = std::make_shared<Gateway>(std::make_shared<HttpChatBackend>(),
                                                    std::make_shared<HttpEmbedBackend>());
    }
    runtime.config = std::move(config);
    return runtime;
}

inline std::vector<SolutionProductCategory> load_spc_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open SPC file " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("bad JSON in " + path.string() + ": " + e.what());
    }
    if (!j.is_array()) throw ConfigError("SPC file must be a JSON list");
    std::vector<SolutionProductCategory> spcs;
    for (const auto& item : j) {
        if (!item.contains("spc_id") || !item.contains("display_name"))
            throw ConfigError("every SPC needs \"spc_id\" and \"display_name\"");
        spcs.push_back({item["spc_id"].get<std::string>(),
                        item["display_name"].get<std::string>()});
    }
    if (spcs.empty()) throw ConfigError("SPC file lists no categories");
    return spcs;
}

inline std::vector<int> parse_ks(const std::string& csv) {
    std::vector<int> ks;
    std::size_t pos = 0;
    while (pos <= csv.size()) {
        std::size_t comma = csv.find(',', pos);
        std::string token = csv.substr(pos, comma == std::string::npos ? csv.size() - pos
                                                                       : comma - pos);
        if (!token.empty()) {
            try {
                ks.push_back(std::stoi(token));
            } catch (const std::exception&) {
                throw ConfigError("bad k value \"" + token + "\" (expected integers like 1,3,5)");
            }
        }
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    if (ks.empty()) throw ConfigError("--k lists no cutoffs");
    return ks;
}

inline std::shared_ptr<const CatalogStore> load_store_checked(const AppConfig& config) {
    return std::make_shared<const CatalogStore>(load_store(config.catalog_dir));
}

inline std::shared_ptr<Pipeline> make_pipeline(const Runtime& runtime,
                                               std::shared_ptr<const CatalogStore> store) {
    return std::make_shared<Pipeline>(runtime.gateway, std::move(store), runtime.config.chat,
                                      runtime.config.embed, runtime.config.pipeline);
}

inline std::string dataset_id_from_path(const std::filesystem::path& path) {
    return path.stem().string();
}

inline void print_reports(const std::vector<MetricReport>& reports) {
    for (const auto& report : reports) {
        std::cout << report.label;
        for (const auto& [k, value] : report.mrr_at) {
            char buf[48];
            std::snprintf(buf, sizeof buf, " mrr@%d=%.4f", k, value);
            std::cout << buf;
        }
        for (const auto& [k, value] : report.recall_at) {
            char buf[48];
            std::snprintf(buf, sizeof buf, " r@%d=%.4f", k, value);
            std::cout << buf;
        }
        if (report.n_failures > 0) std::cout << " failures=" << report.n_failures;
        std::cout << "\n";
    }
}

inline std::vector<LabeledConversation> load_dataset_checked(const AppConfig& config,
                                                             const std::string& dataset_flag) {
    std::filesystem::path path =
        dataset_flag.empty() ? config.dataset_path : std::filesystem::path(dataset_flag);
    if (path.empty()) throw ConfigError("no dataset given (--dataset or paths.dataset)");
    return load_dataset(path);
}

// ---------------------------------------------------------------------------
// Subcommand bodies.

inline int cmd_build_catalog(Runtime& runtime, const std::string& spcs_path, int results_per_query,
                             int chunk_tokens) {
    std::vector<SolutionProductCategory> spcs = load_spc_file(spcs_path);

    ScriptedSearchClient offline_fallback;
    SearchClient* search = runtime.search.get();
    if (!search) {
        if (!runtime.config.mock_mode)
            throw ConfigError("web-search catalogs need search.endpoint (or mock mode)");
        search = &offline_fallback;
    }

    BuildReport report;
    DocumentSet docs = fetch_web_docs(spcs, *search, report, results_per_query, chunk_tokens);
    DocumentSet generated = generate_catalog_docs(*runtime.gateway, runtime.config.chat, spcs,
                                                  report, chunk_tokens);
    docs = merge_document_sets(std::move(docs), generated);

    CatalogStore store = build_store(*runtime.gateway, runtime.config.embed, spcs, std::move(docs));
    save_store(store, runtime.config.catalog_dir);

    std::cout << "built catalog: " << store.universe.size() << " SPCs x "
              << store.documents.size() << " sources -> " << runtime.config.catalog_dir.string()
              << "\n";
    for (const auto& issue : report.issues)
        std::cout << "issue: " << issue.spc_id << " [" << to_string(issue.source)
                  << "]: " << issue.message << "\n";
    return 0;
}

inline int cmd_recommend(Runtime& runtime, const std::string& conversation_path,
                         const std::string& out_path) {
    std::ifstream in(conversation_path);
    if (!in) throw IoError("cannot open conversation " + conversation_path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidConversation("bad JSON in " + conversation_path + ": " + e.what());
    }
    Conversation conversation = conversation_from_json(j);

    auto store = load_store_checked(runtime.config);
    auto pipeline = make_pipeline(runtime, store);
    RecommendResult result = pipeline->recommend(conversation);
    nlohmann::json response = recommend_response_json(
        *store, result, make_trace_id(conversation.conversation_id, pipeline->fingerprint()));

    if (out_path.empty()) {
        std::cout << response.dump(2) << "\n";
    } else {
        std::ofstream out(out_path);
        if (!out) throw IoError("cannot write " + out_path);
        out << response.dump(2) << "\n";
    }
    return 0;
}

inline int cmd_eval(Runtime& runtime, const std::string& dataset_flag, const std::string& ks_csv) {
    std::vector<LabeledConversation> dataset = load_dataset_checked(runtime.config, dataset_flag);
    auto pipeline = make_pipeline(runtime, load_store_checked(runtime.config));

    DatasetEvaluation eval = evaluate_dataset(
        *pipeline, dataset, parse_ks(ks_csv),
        dataset_id_from_path(dataset_flag.empty() ? runtime.config.dataset_path
                                                  : std::filesystem::path(dataset_flag)));

    const std::filesystem::path dir = runtime.config.report_dir;
    write_metric_reports_csv(dir / "report.csv", {eval.report});
    write_metric_reports_text(dir / "report.txt", {eval.report});
    OverheadReport overhead = measure_overhead(eval.outcomes);
    write_overhead_csv(dir / "overhead.csv", overhead);
    write_overhead_text(dir / "overhead.txt", overhead);

    print_reports({eval.report});
    std::cout << "reports written to " << dir.string() << "\n";
    return 0;
}

inline int cmd_ablate_db(Runtime& runtime, const std::string& dataset_flag,
                         const std::string& ks_csv) {
    std::vector<LabeledConversation> dataset = load_dataset_checked(runtime.config, dataset_flag);
    auto store = load_store_checked(runtime.config);
    std::vector<DatasetEvaluation> rows = run_db_ablation(
        runtime.gateway, store, runtime.config.chat, runtime.config.embed, runtime.config.pipeline,
        dataset, parse_ks(ks_csv),
        dataset_id_from_path(dataset_flag.empty() ? runtime.config.dataset_path
                                                  : std::filesystem::path(dataset_flag)));

    std::vector<MetricReport> reports;
    for (const auto& row : rows) reports.push_back(row.report);
    const std::filesystem::path dir = runtime.config.report_dir;
    write_metric_reports_csv(dir / "ablate_db.csv", reports);
    write_metric_reports_text(dir / "ablate_db.txt", reports);
    print_reports(reports);
    return 0;
}

inline int cmd_ablate_bootstrap(Runtime& runtime, const std::string& dataset_flag,
                                const std::string& ks_csv) {
    std::vector<LabeledConversation> dataset = load_dataset_checked(runtime.config, dataset_flag);
    auto store = load_store_checked(runtime.config);
    std::vector<DatasetEvaluation> rows = run_bootstrap_ablation(
        runtime.gateway, store, runtime.config.chat, runtime.config.embed, runtime.config.pipeline,
        dataset, parse_ks(ks_csv),
        dataset_id_from_path(dataset_flag.empty() ? runtime.config.dataset_path
                                                  : std::filesystem::path(dataset_flag)));

    std::vector<MetricReport> reports;
    std::vector<std::pair<double, const MetricReport*>> points;
    for (const auto& row : rows) reports.push_back(row.report);
    for (std::size_t i = 0; i < reports.size(); ++i)
        points.emplace_back(static_cast<double>(i), &reports[i]);

    const std::filesystem::path dir = runtime.config.report_dir;
    write_metric_reports_csv(dir / "ablate_bootstrap.csv", reports);
    write_metric_reports_text(dir / "ablate_bootstrap.txt", reports);
    write_plotdata_csv(dir / "plotdata" / "bootstrap_iterations.csv", "iterations", points);
    print_reports(reports);
    return 0;
}

inline int cmd_length_sweep(Runtime& runtime, const std::string& dataset_flag,
                            const std::string& ks_csv) {
    std::vector<LabeledConversation> dataset = load_dataset_checked(runtime.config, dataset_flag);
    auto pipeline = make_pipeline(runtime, load_store_checked(runtime.config));
    std::vector<DatasetEvaluation> rows = length_sensitivity_sweep(
        *pipeline, dataset, parse_ks(ks_csv),
        dataset_id_from_path(dataset_flag.empty() ? runtime.config.dataset_path
                                                  : std::filesystem::path(dataset_flag)));

    std::vector<MetricReport> reports;
    std::vector<std::pair<double, const MetricReport*>> points;
    for (const auto& row : rows) reports.push_back(row.report);
    for (std::size_t i = 0; i < reports.size(); ++i)
        points.emplace_back(static_cast<double>(i + 1), &reports[i]);

    const std::filesystem::path dir = runtime.config.report_dir;
    write_metric_reports_csv(dir / "length_sweep.csv", reports);
    write_metric_reports_text(dir / "length_sweep.txt", reports);
    write_plotdata_csv(dir / "plotdata" / "conversation_length.csv", "utterances", points);
    print_reports(reports);
    return 0;
}

inline int cmd_simulate(Runtime& runtime, const std::string& scenarios_path,
                        const std::string& personas_path, int n_per_scenario,
                        const std::string& out_flag) {
    std::vector<ScenarioSpec> scenarios = load_scenarios(scenarios_path);
    PersonaDistributions distributions = load_persona_distributions(personas_path);

    std::shared_ptr<const CatalogStore> store;
    if (std::filesystem::exists(runtime.config.catalog_dir / "universe.json"))
        store = load_store_checked(runtime.config);

    GeneratedDataset generated = generate_dataset(
        *runtime.gateway, scenarios, distributions, runtime.config.sim_user,
        runtime.config.sim_assistant, n_per_scenario, runtime.config.pipeline.base_seed, {},
        store.get());

    std::filesystem::path out_path = out_flag.empty()
                                         ? (runtime.config.dataset_path.empty()
                                                ? std::filesystem::path("simulated.jsonl")
                                                : runtime.config.dataset_path)
                                         : std::filesystem::path(out_flag);
    save_dataset(out_path, generated.labeled());
    std::filesystem::path manifest_path = out_path;
    manifest_path.replace_extension(".manifest.json");
    std::ofstream manifest(manifest_path);
    if (!manifest) throw IoError("cannot write " + manifest_path.string());
    manifest << generated.manifest.to_json().dump(2) << "\n";

    std::cout << "simulated " << generated.conversations.size() << " conversations -> "
              << out_path.string() << " (manifest " << manifest_path.string() << ")\n";
    if (!generated.manifest.failures.empty())
        std::cout << "fatal disclosure failures: " << generated.manifest.failures.size() << "\n";
    return 0;
}

inline int cmd_serve(Runtime& runtime, const std::string& bind_flag, int port_flag) {
    auto store = load_store_checked(runtime.config);
    auto pipeline = std::make_shared<const Pipeline>(runtime.gateway, store, runtime.config.chat,
                                                     runtime.config.embed,
                                                     runtime.config.pipeline);
    ServiceOptions options = runtime.config.service;
    if (!bind_flag.empty()) options.bind_address = bind_flag;
    if (port_flag > 0) options.port = port_flag;

    RecommendService service(pipeline, options);
    std::cout << "listening on " << options.bind_address << ":" << options.port
              << " (fingerprint " << service.fingerprint() << ")\n";
    if (!service.listen()) throw IoError("cannot bind " + options.bind_address + ":" +
                                         std::to_string(options.port));
    return 0;
}

}  // namespace detail

inline int run(int argc, const char* const* argv) {
    CLI::App app{"Implicit recommender for support conversations"};
    app.require_subcommand(1);

    CommonFlags flags;

    auto* build = app.add_subcommand("build-catalog", "Build and persist the five catalog DBs");
    std::string spcs_path;
    int results_per_query = kDefaultResultsPerQuery;
    int chunk_tokens = kDefaultMaxChunkTokens;
    build->add_option("--spcs", spcs_path, "JSON list of {spc_id, display_name}")->required();
    build->add_option("--results-per-query", results_per_query, "Web results per search query");
    build->add_option("--chunk-tokens", chunk_tokens, "Max tokens per embedded chunk");
    detail::add_common_flags(build, flags);

    auto* recommend = app.add_subcommand("recommend", "Recommend SPCs for one conversation");
    std::string conversation_path, recommend_out;
    recommend->add_option("--conversation", conversation_path, "Conversation JSON file")
        ->required();
    recommend->add_option("--out", recommend_out, "Write the response JSON here");
    detail::add_common_flags(recommend, flags);

    std::string dataset_flag, ks_csv = "1,3,5";
    auto add_eval_flags = [&](CLI::App* cmd) {
        cmd->add_option("--dataset", dataset_flag, "Labeled conversation JSONL");
        cmd->add_option("--k", ks_csv, "Comma-separated metric cutoffs");
        detail::add_common_flags(cmd, flags);
    };
    auto* eval = app.add_subcommand("eval", "Evaluate MRR@k / Recall@k on a dataset");
    add_eval_flags(eval);
    auto* ablate_db = app.add_subcommand("ablate-db", "Evaluate the 11 catalog-DB configurations");
    add_eval_flags(ablate_db);
    auto* ablate_bootstrap =
        app.add_subcommand("ablate-bootstrap", "Evaluate bootstrap iteration counts 0-3");
    add_eval_flags(ablate_bootstrap);
    auto* length_sweep =
        app.add_subcommand("length-sweep", "Evaluate on conversation prefixes of growing length");
    add_eval_flags(length_sweep);

    auto* simulate = app.add_subcommand("simulate", "Generate a synthetic labeled dataset");
    std::string scenarios_path, personas_path, simulate_out;
    int n_per_scenario = 2;
    simulate->add_option("--scenarios", scenarios_path, "Scenario JSON list")->required();
    simulate->add_option("--personas", personas_path, "Persona distribution JSON")->required();
    simulate->add_option("--n", n_per_scenario, "Conversations per scenario");
    simulate->add_option("--out", simulate_out, "Output dataset JSONL path");
    detail::add_common_flags(simulate, flags);

    auto* serve = app.add_subcommand("serve", "Run the HTTP recommendation service");
    std::string bind_flag;
    int port_flag = 0;
    serve->add_option("--bind", bind_flag, "Bind address");
    serve->add_option("--port", port_flag, "Port");
    detail::add_common_flags(serve, flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() != 0) std::cerr << app.help() << "\n";
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        Runtime runtime = detail::make_runtime(detail::merge_config(flags));
        if (build->parsed())
            return detail::cmd_build_catalog(runtime, spcs_path, results_per_query, chunk_tokens);
        if (recommend->parsed())
            return detail::cmd_recommend(runtime, conversation_path, recommend_out);
        if (eval->parsed()) return detail::cmd_eval(runtime, dataset_flag, ks_csv);
        if (ablate_db->parsed()) return detail::cmd_ablate_db(runtime, dataset_flag, ks_csv);
        if (ablate_bootstrap->parsed())
            return detail::cmd_ablate_bootstrap(runtime, dataset_flag, ks_csv);
        if (length_sweep->parsed()) return detail::cmd_length_sweep(runtime, dataset_flag, ks_csv);
        if (simulate->parsed())
            return detail::cmd_simulate(runtime, scenarios_path, personas_path, n_per_scenario,
                                        simulate_out);
        if (serve->parsed()) return detail::cmd_serve(runtime, bind_flag, port_flag);
        std::cerr << app.help() << "\n";
        return 1;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const InvalidConversation& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const BadDistribution& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const Error& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace impress::cli
