#pragma once

#include <array>
#include <cctype>
#include <string>
#include <string_view>

#include "impress/errors.hpp"

namespace impress {

/// The recommendable unit: a generic product/service category.
struct SolutionProductCategory {
    std::string spc_id;       // stable lowercase slug, unique within a universe
    std::string display_name;  // e.g. "VPN service"

    bool operator==(const SolutionProductCategory&) const = default;
};

/// The five catalog databases. The universe of sources is closed.
enum class CatalogSource {
    WebSearchFeatures,
    WebSearchUseCases,
    GenDescriptions,
    GenFeatures,
    GenUseCases,
};

inline constexpr std::array<CatalogSource, 5> kAllSources = {
    CatalogSource::WebSearchFeatures, CatalogSource::WebSearchUseCases,
    CatalogSource::GenDescriptions,   CatalogSource::GenFeatures,
    CatalogSource::GenUseCases,
};

inline std::string to_string(CatalogSource source) {
    switch (source) {
        case CatalogSource::WebSearchFeatures: return "web-search-features";
        case CatalogSource::WebSearchUseCases: return "web-search-use-cases";
        case CatalogSource::GenDescriptions: return "gen-descriptions";
        case CatalogSource::GenFeatures: return "gen-features";
        case CatalogSource::GenUseCases: return "gen-use-cases";
    }
    return "unknown";
}

inline CatalogSource source_from_string(const std::string& name) {
    for (CatalogSource source : kAllSources)
        if (to_string(source) == name) return source;
    throw ConfigError("unknown catalog source: " + name);
}

/// Lowercase slug: alnum runs joined by single dashes.
inline std::string make_slug(std::string_view text) {
    std::string slug;
    bool pending_dash = false;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            if (pending_dash && !slug.empty()) slug.push_back('-');
            pending_dash = false;
            slug.push_back(static_cast<char>(std::tolower(c)));
        } else {
            pending_dash = true;
        }
    }
    return slug;
}

inline bool is_valid_slug(std::string_view s) {
    if (s.empty()) return false;
    auto alnum = [](unsigned char c) { return std::islower(c) || std::isdigit(c); };
    if (!alnum(s.front()) || !alnum(s.back())) return false;
    for (unsigned char c : s)
        if (!(alnum(c) || c == '-' || c == '_')) return false;
    return true;
}

}  // namespace impress
