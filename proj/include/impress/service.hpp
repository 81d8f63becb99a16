#pragma once

#include <chrono>
#include <cstdio>
#include <future>
#include <memory>
#include <string>
#include <thread>
#include <utility>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "impress/config.hpp"
#include "impress/dataset.hpp"
#include "impress/errors.hpp"
#include "impress/pipeline.hpp"
#include "impress/rng.hpp"

namespace impress {

inline std::string make_trace_id(const std::string& conversation_id,
                                 const std::string& fingerprint) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(conversation_id + fingerprint)));
    return buf;
}

/// Wire shape shared by the service and the recommend CLI command.
inline nlohmann::json recommend_response_json(const CatalogStore& store,
                                              const RecommendResult& result,
                                              const std::string& trace_id) {
    nlohmann::json response;
    response["diagnosis"] = {{"summary", result.diagnosis.summary},
                             {"diagnosis", result.diagnosis.diagnosis},
                             {"measures", result.diagnosis.measures}};
    auto ranked = nlohmann::json::array();
    for (const auto& scored : result.ranking.ordered_spcs)
        ranked.push_back({{"spc_id", scored.spc_id},
                          {"display_name", store.display_name(scored.spc_id)},
                          {"score", scored.borda_score},
                          {"best_distance", scored.best_distance}});
    response["ranked"] = ranked;
    response["trace_id"] = trace_id;
    const TokenUsage usage = result.total_usage();
    response["overhead"] = {{"tokens",
                             {{"prompt", usage.prompt_tokens},
                              {"completion", usage.completion_tokens},
                              {"total", usage.total()}}},
                            {"ms", result.total_ms()}};
    return response;
}

/// HTTP front end over one immutable Pipeline.
///
///   GET  /v1/health     -> {"status", "fingerprint"}
///   POST /v1/recommend  -> RecommendResponse
///
/// Statuses: 400 malformed JSON body, 422 invalid conversation, 502 pipeline or
/// backend failure, 504 request timeout. Handlers are plain functions over
/// strings, so tests can drive them without sockets.
class RecommendService {
public:
    RecommendService(std::shared_ptr<const Pipeline> pipeline, ServiceOptions options)
        : pipeline_(std::move(pipeline)), options_(options) {
        if (!pipeline_) throw std::invalid_argument("pipeline must not be null");
        fingerprint_ = pipeline_->fingerprint();
    }

    const std::string& fingerprint() const { return fingerprint_; }

    nlohmann::json handle_health() const {
        return {{"status", "ok"}, {"fingerprint", fingerprint_}};
    }

    /// Deterministic per-request id: same conversation against the same config
    /// always traces identically.
    std::string trace_id(const std::string& conversation_id) const {
        return make_trace_id(conversation_id, fingerprint_);
    }

    std::pair<int, nlohmann::json> handle_recommend(const std::string& body) const {
        nlohmann::json parsed;
        try {
            parsed = nlohmann::json::parse(body);
        } catch (const nlohmann::json::exception& e) {
            return {400, {{"error", std::string("malformed JSON body: ") + e.what()}}};
        }

        Conversation conversation;
        try {
            conversation = conversation_from_json(parsed);
            validate_conversation(conversation);
        } catch (const InvalidConversation& e) {
            return {422, {{"error", e.what()}}};
        }

        auto task = std::make_shared<std::packaged_task<RecommendResult()>>(
            [pipeline = pipeline_, conversation] { return pipeline->recommend(conversation); });
        std::future<RecommendResult> future = task->get_future();
        std::thread([task] { (*task)(); }).detach();

        const auto timeout =
            std::chrono::duration<double>(options_.request_timeout_s);
        if (future.wait_for(timeout) != std::future_status::ready)
            return {504, {{"error", "recommend timed out"}}};

        try {
            return {200, render_response(future.get())};
        } catch (const InvalidConversation& e) {
            return {422, {{"error", e.what()}}};
        } catch (const Error& e) {
            return {502, {{"error", e.what()}}};
        } catch (const std::exception& e) {
            return {500, {{"error", e.what()}}};
        }
    }

    void register_routes(httplib::Server& server) const {
        server.Get("/v1/health", [this](const httplib::Request&, httplib::Response& res) {
            res.set_content(handle_health().dump(), "application/json");
        });
        server.Post("/v1/recommend", [this](const httplib::Request& req, httplib::Response& res) {
            auto [status, body] = handle_recommend(req.body);
            res.status = status;
            res.set_content(body.dump(), "application/json");
        });
    }

    /// Blocks serving requests until stop() is called on the returned server.
    bool listen() {
        server_ = std::make_shared<httplib::Server>();
        register_routes(*server_);
        return server_->listen(options_.bind_address, options_.port);
    }

    std::shared_ptr<httplib::Server> server() const { return server_; }

private:
    nlohmann::json render_response(const RecommendResult& result) const {
        return recommend_response_json(pipeline_->store(), result,
                                       trace_id(result.conversation_id));
    }

    std::shared_ptr<const Pipeline> pipeline_;
    ServiceOptions options_;
    std::string fingerprint_;
    std::shared_ptr<httplib::Server> server_;
};

}  // namespace impress
