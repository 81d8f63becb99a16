#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "impress/errors.hpp"
#include "impress/pipeline.hpp"

namespace impress {

struct LabeledConversation {
    Conversation conversation;
    std::set<std::string> gold_spcs;

    bool operator==(const LabeledConversation&) const = default;
};

inline Role parse_role(const std::string& name) {
    if (name == "user") return Role::User;
    if (name == "assistant") return Role::Assistant;
    if (name == "system") return Role::System;
    throw InvalidConversation("unknown role \"" + name + "\"");
}

/// Wire format: {"conversation_id", "domain_tag", "utterances": [{"role",
/// "text"}], "gold_spcs": [...] (optional)}.
inline Conversation conversation_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw InvalidConversation("conversation must be a JSON object");
    Conversation c;
    if (!j.contains("conversation_id") || !j["conversation_id"].is_string())
        throw InvalidConversation("\"conversation_id\" must be a string");
    c.conversation_id = j["conversation_id"].get<std::string>();
    c.domain_tag = j.value("domain_tag", "");
    if (!j.contains("utterances") || !j["utterances"].is_array())
        throw InvalidConversation("\"utterances\" must be a list");
    for (const auto& u : j["utterances"]) {
        if (!u.is_object() || !u.contains("role") || !u["role"].is_string() ||
            !u.contains("text") || !u["text"].is_string())
            throw InvalidConversation("every utterance needs string \"role\" and \"text\"");
        c.utterances.push_back({parse_role(u["role"].get<std::string>()),
                                u["text"].get<std::string>()});
    }
    return c;
}

inline nlohmann::json conversation_to_json(const Conversation& c) {
    nlohmann::json j;
    j["conversation_id"] = c.conversation_id;
    j["domain_tag"] = c.domain_tag;
    j["utterances"] = nlohmann::json::array();
    for (const auto& u : c.utterances)
        j["utterances"].push_back({{"role", to_string(u.role)}, {"text", u.text}});
    return j;
}

inline LabeledConversation labeled_conversation_from_json(const nlohmann::json& j) {
    LabeledConversation item;
    item.conversation = conversation_from_json(j);
    if (j.contains("gold_spcs")) {
        if (!j["gold_spcs"].is_array())
            throw InvalidConversation("\"gold_spcs\" must be a list of spc ids");
        for (const auto& g : j["gold_spcs"]) {
            if (!g.is_string()) throw InvalidConversation("\"gold_spcs\" must contain strings");
            item.gold_spcs.insert(g.get<std::string>());
        }
    }
    return item;
}

inline nlohmann::json labeled_conversation_to_json(const LabeledConversation& item) {
    nlohmann::json j = conversation_to_json(item.conversation);
    j["gold_spcs"] = item.gold_spcs;
    return j;
}

/// One JSON object per line; blank lines are skipped.
inline std::vector<LabeledConversation> load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dataset " + path.string());
    std::vector<LabeledConversation> items;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw IoError(path.string() + ":" + std::to_string(line_no) + ": bad JSON: " + e.what());
        }
        try {
            items.push_back(labeled_conversation_from_json(j));
        } catch (const InvalidConversation& e) {
            throw InvalidConversation(path.string() + ":" + std::to_string(line_no) + ": " +
                                      e.what());
        }
    }
    return items;
}

inline void save_dataset(const std::filesystem::path& path,
                         const std::vector<LabeledConversation>& items) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write dataset " + path.string());
    for (const auto& item : items) out << labeled_conversation_to_json(item).dump() << "\n";
    if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace impress
