#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "impress/catalog.hpp"
#include "impress/dataset.hpp"
#include "impress/errors.hpp"
#include "impress/llm.hpp"
#include "impress/pipeline.hpp"
#include "impress/rng.hpp"

namespace impress {

inline const char* kSimUserTag = "sim-user";
inline const char* kSimAssistantTag = "sim-assistant";
inline const char* kResolvedMarker = "[[RESOLVED]]";

struct Persona {
    int age = 0;
    std::string gender;
    std::string occupation;

    bool operator==(const Persona&) const = default;
};

/// Either a weighted categorical or an inclusive integer range.
struct AttributeDistribution {
    std::vector<std::string> categories;
    std::vector<double> weights;  // parallel to categories; empty means uniform
    std::optional<std::pair<int, int>> range;

    void validate(const std::string& attribute) const {
        if (range) {
            if (!categories.empty())
                throw BadDistribution(attribute + ": range and categories are exclusive");
            if (range->first > range->second)
                throw BadDistribution(attribute + ": range min exceeds max");
            return;
        }
        if (categories.empty()) throw BadDistribution(attribute + ": no categories and no range");
        if (!weights.empty()) {
            if (weights.size() != categories.size())
                throw BadDistribution(attribute + ": weights do not match categories");
            double total = 0.0;
            for (double w : weights) {
                if (w <= 0.0) throw BadDistribution(attribute + ": weights must be positive");
                total += w;
            }
            if (total <= 0.0) throw BadDistribution(attribute + ": weights must sum to > 0");
        }
    }

    std::string sample(Rng& rng) const {
        if (range) {
            int span = range->second - range->first + 1;
            return std::to_string(range->first +
                                  static_cast<int>(rng.next_index(static_cast<std::uint64_t>(span))));
        }
        if (weights.empty())
            return categories[rng.next_index(categories.size())];
        double total = 0.0;
        for (double w : weights) total += w;
        double r = rng.next_double() * total;
        double cum = 0.0;
        for (std::size_t i = 0; i < categories.size(); ++i) {
            cum += weights[i];
            if (r < cum) return categories[i];
        }
        return categories.back();
    }
};

struct PersonaDistributions {
    AttributeDistribution age;
    AttributeDistribution gender;
    AttributeDistribution occupation;

    void validate() const {
        age.validate("age");
        gender.validate("gender");
        occupation.validate("occupation");
    }
};

/// JSON map attribute -> {"categories": [...], "weights": [...]} or
/// {"range": [min, max]}.
inline AttributeDistribution attribute_distribution_from_json(const std::string& attribute,
                                                              const nlohmann::json& j) {
    if (!j.is_object()) throw BadDistribution(attribute + ": distribution must be an object");
    AttributeDistribution dist;
    if (j.contains("range")) {
        if (!j["range"].is_array() || j["range"].size() != 2 || !j["range"][0].is_number_integer() ||
            !j["range"][1].is_number_integer())
            throw BadDistribution(attribute + ": \"range\" must be [min, max] integers");
        dist.range = {j["range"][0].get<int>(), j["range"][1].get<int>()};
    }
    if (j.contains("categories")) {
        if (!j["categories"].is_array())
            throw BadDistribution(attribute + ": \"categories\" must be a list");
        for (const auto& c : j["categories"]) {
            if (!c.is_string()) throw BadDistribution(attribute + ": categories must be strings");
            dist.categories.push_back(c.get<std::string>());
        }
    }
    if (j.contains("weights")) {
        if (!j["weights"].is_array())
            throw BadDistribution(attribute + ": \"weights\" must be a list of numbers");
        for (const auto& w : j["weights"]) {
            if (!w.is_number()) throw BadDistribution(attribute + ": weights must be numbers");
            dist.weights.push_back(w.get<double>());
        }
    }
    dist.validate(attribute);
    return dist;
}

inline PersonaDistributions persona_distributions_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("age") || !j.contains("gender") || !j.contains("occupation"))
        throw BadDistribution("persona distributions need \"age\", \"gender\", \"occupation\"");
    PersonaDistributions dists;
    dists.age = attribute_distribution_from_json("age", j["age"]);
    dists.gender = attribute_distribution_from_json("gender", j["gender"]);
    dists.occupation = attribute_distribution_from_json("occupation", j["occupation"]);
    return dists;
}

inline PersonaDistributions load_persona_distributions(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("bad JSON in " + path.string() + ": " + e.what());
    }
    return persona_distributions_from_json(j);
}

inline Persona sample_persona(const PersonaDistributions& distributions, std::uint64_t seed) {
    distributions.validate();
    Rng rng(seed);
    Persona persona;
    const std::string age = distributions.age.sample(rng);
    try {
        persona.age = std::stoi(age);
    } catch (const std::exception&) {
        throw BadDistribution("age category \"" + age + "\" is not an integer");
    }
    persona.gender = distributions.gender.sample(rng);
    persona.occupation = distributions.occupation.sample(rng);
    return persona;
}

struct ScenarioSpec {
    std::string problem_essence;
    std::string root_cause;
    std::set<std::string> gold_spcs;
    std::string domain_tag;

    void validate() const {
        if (detail::trim_copy(problem_essence).empty())
            throw ConfigError("scenario problem_essence must be non-empty");
        if (detail::trim_copy(root_cause).empty())
            throw ConfigError("scenario root_cause must be non-empty");
        if (gold_spcs.empty()) throw ConfigError("scenario gold_spcs must be non-empty");
    }
};

inline std::vector<ScenarioSpec> load_scenarios(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("bad JSON in " + path.string() + ": " + e.what());
    }
    if (!j.is_array()) throw ConfigError("scenario file must be a JSON list");
    std::vector<ScenarioSpec> scenarios;
    for (const auto& item : j) {
        ScenarioSpec scenario;
        scenario.problem_essence = item.value("problem_essence", "");
        scenario.root_cause = item.value("root_cause", "");
        scenario.domain_tag = item.value("domain_tag", "");
        for (const auto& g : item.value("gold_spcs", nlohmann::json::array()))
            scenario.gold_spcs.insert(g.get<std::string>());
        scenario.validate();
        scenarios.push_back(std::move(scenario));
    }
    return scenarios;
}

struct SimOptions {
    int max_exchanges = 4;
    int max_regenerations = 3;
};

struct SimulatedConversation {
    LabeledConversation labeled;
    Persona persona;
    ScenarioSpec scenario;
    std::uint64_t seed = 0;
    int regenerations = 0;
};

namespace detail {

inline bool contains_case_insensitive(const std::string& haystack, const std::string& needle) {
    if (needle.empty()) return false;
    const std::string h = to_lower_copy(haystack);
    const std::string n = to_lower_copy(needle);
    return h.find(n) != std::string::npos;
}

inline std::string strip_resolved_marker(std::string text, bool& resolved) {
    std::size_t pos;
    while ((pos = text.find(kResolvedMarker)) != std::string::npos) {
        text.erase(pos, std::string(kResolvedMarker).size());
        resolved = true;
    }
    return trim_copy(text);
}

inline std::vector<ChatMessage> user_sim_messages(const Persona& persona,
                                                  const ScenarioSpec& scenario,
                                                  const Conversation& so_far) {
    std::string system =
        "You are role-playing a support-seeking user.\n"
        "Persona: age " + std::to_string(persona.age) + ", " + persona.gender + ", " +
        persona.occupation + ".\n"
        "Your problem: " + scenario.problem_essence + "\n"
        "The underlying root cause (known only to you): " + scenario.root_cause + "\n"
        "Never state the root cause explicitly. Describe symptoms only.\n"
        "If your problem is resolved, reply with the single line " +
        std::string(kResolvedMarker) + ".";
    std::string request;
    if (so_far.utterances.empty()) {
        request = "Open the support conversation by describing your problem in your own words.";
    } else {
        request = "Conversation so far:\n" + render_transcript(so_far) +
                  "\nWrite the user's next reply only.";
    }
    return {system_message(std::move(system)), user_message(std::move(request))};
}

inline std::vector<ChatMessage> assistant_sim_messages(const Conversation& so_far) {
    return {
        system_message("You are a knowledgeable support assistant. Ask focused questions and "
                       "suggest concrete measures."),
        user_message("Conversation so far:\n" + render_transcript(so_far) +
                     "\nWrite the assistant's next reply only."),
    };
}

}  // namespace detail

/// One simulated conversation: user opener, then up to max_exchanges
/// assistant/user rounds, ending early when the user simulator signals
/// resolution. A conversation whose user turns leak the root cause verbatim is
/// regenerated with a derived seed; after max_regenerations it is fatal.
inline SimulatedConversation generate_conversation(Gateway& gateway, const Persona& persona,
                                                   const ScenarioSpec& scenario,
                                                   const ModelConfig& user_config,
                                                   const ModelConfig& assistant_config,
                                                   std::uint64_t seed,
                                                   const SimOptions& options = {},
                                                   const std::string& conversation_id = "sim-0") {
    scenario.validate();
    user_config.validate();
    assistant_config.validate();
    if (options.max_exchanges < 0) throw std::invalid_argument("max_exchanges must be >= 0");

    std::string violation;
    for (int attempt = 0; attempt <= options.max_regenerations; ++attempt) {
        Conversation conv;
        conv.conversation_id = conversation_id;
        conv.domain_tag = scenario.domain_tag;

        bool resolved = false;
        ChatExchange opener = gateway.complete_chat(
            user_config, detail::user_sim_messages(persona, scenario, conv), kSimUserTag);
        std::string opener_text = detail::strip_resolved_marker(opener.response_text, resolved);
        if (!opener_text.empty()) conv.utterances.push_back({Role::User, opener_text});

        for (int exchange = 0; exchange < options.max_exchanges && !resolved; ++exchange) {
            if (conv.utterances.empty()) break;
            ChatExchange reply = gateway.complete_chat(
                assistant_config, detail::assistant_sim_messages(conv), kSimAssistantTag);
            std::string reply_text = detail::trim_copy(reply.response_text);
            if (reply_text.empty()) break;
            conv.utterances.push_back({Role::Assistant, reply_text});

            ChatExchange answer = gateway.complete_chat(
                user_config, detail::user_sim_messages(persona, scenario, conv), kSimUserTag);
            std::string answer_text = detail::strip_resolved_marker(answer.response_text, resolved);
            if (answer_text.empty()) break;
            conv.utterances.push_back({Role::User, answer_text});
        }

        if (conv.utterances.empty())
            throw BackendRefusal("user simulator produced an empty opener");

        bool leaked = false;
        for (const auto& u : conv.utterances)
            if (u.role == Role::User &&
                detail::contains_case_insensitive(u.text, scenario.root_cause)) {
                leaked = true;
                break;
            }
        if (leaked) {
            violation = "root cause leaked verbatim in conversation " + conversation_id;
            continue;
        }

        SimulatedConversation out;
        out.labeled.conversation = std::move(conv);
        out.labeled.gold_spcs = scenario.gold_spcs;
        out.persona = persona;
        out.scenario = scenario;
        out.seed = seed;
        out.regenerations = attempt;
        return out;
    }
    throw DisclosureViolation(violation + " after " + std::to_string(options.max_regenerations) +
                              " regenerations");
}

struct DatasetManifest {
    std::uint64_t base_seed = 0;
    int n_per_scenario = 0;
    std::string user_model_id;
    std::string assistant_model_id;
    int n_scenarios = 0;
    int n_conversations = 0;
    int total_rejections = 0;
    std::vector<nlohmann::json> failures;  // {scenario_index, rep, error}

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["base_seed"] = base_seed;
        j["n_per_scenario"] = n_per_scenario;
        j["user_model_id"] = user_model_id;
        j["assistant_model_id"] = assistant_model_id;
        j["n_scenarios"] = n_scenarios;
        j["n_conversations"] = n_conversations;
        j["total_rejections"] = total_rejections;
        j["failures"] = failures;
        return j;
    }
};

struct GeneratedDataset {
    std::vector<SimulatedConversation> conversations;
    DatasetManifest manifest;

    std::vector<LabeledConversation> labeled() const {
        std::vector<LabeledConversation> out;
        out.reserve(conversations.size());
        for (const auto& c : conversations) out.push_back(c.labeled);
        return out;
    }
};

/// Deterministic: conversation ids, personas, and turn seeds all derive from
/// base_seed. A scenario rep that stays in violation after its regeneration
/// budget is recorded in the manifest and skipped; the run continues.
inline GeneratedDataset generate_dataset(Gateway& gateway,
                                         const std::vector<ScenarioSpec>& scenarios,
                                         const PersonaDistributions& distributions,
                                         const ModelConfig& user_config,
                                         const ModelConfig& assistant_config, int n_per_scenario,
                                         std::uint64_t base_seed, const SimOptions& options = {},
                                         const CatalogStore* universe = nullptr) {
    if (scenarios.empty()) throw std::invalid_argument("scenarios must be non-empty");
    if (n_per_scenario < 1) throw std::invalid_argument("n_per_scenario must be >= 1");
    distributions.validate();
    if (universe)
        for (const auto& scenario : scenarios)
            for (const auto& gold : scenario.gold_spcs)
                if (!universe->has_spc(gold))
                    throw ConfigError("scenario gold spc \"" + gold +
                                      "\" is not in the catalog universe");

    GeneratedDataset out;
    out.manifest.base_seed = base_seed;
    out.manifest.n_per_scenario = n_per_scenario;
    out.manifest.user_model_id = user_config.model_id;
    out.manifest.assistant_model_id = assistant_config.model_id;
    out.manifest.n_scenarios = static_cast<int>(scenarios.size());

    for (std::size_t s = 0; s < scenarios.size(); ++s) {
        for (int rep = 0; rep < n_per_scenario; ++rep) {
            const std::uint64_t seed =
                mix_seed(base_seed, static_cast<std::uint64_t>(s), static_cast<std::uint64_t>(rep));
            const std::string conversation_id =
                "sim-" + std::to_string(s) + "-" + std::to_string(rep);
            Persona persona = sample_persona(distributions, mix_seed(seed, 1));
            try {
                SimulatedConversation conv =
                    generate_conversation(gateway, persona, scenarios[s], user_config,
                                          assistant_config, seed, options, conversation_id);
                out.manifest.total_rejections += conv.regenerations;
                out.manifest.n_conversations += 1;
                out.conversations.push_back(std::move(conv));
            } catch (const DisclosureViolation& e) {
                out.manifest.total_rejections += options.max_regenerations + 1;
                out.manifest.failures.push_back({{"scenario_index", s},
                                                 {"rep", rep},
                                                 {"error", std::string(e.what())}});
            }
        }
    }
    return out;
}

}  // namespace impress
