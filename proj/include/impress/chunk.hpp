#pragma once

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

#include "impress/ledger.hpp"

namespace impress {

struct TextChunk {
    int id = 0;
    std::string text;

    bool operator==(const TextChunk&) const = default;
};

namespace detail {

/// Maximal runs separated by blank lines. Separators are dropped; pieces keep
/// their inner whitespace.
inline std::vector<std::string> split_paragraphs(std::string_view text) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        // find next blank-line separator: newline, optional spaces, newline
        std::size_t sep = std::string_view::npos;
        std::size_t sep_end = 0;
        for (std::size_t i = pos; i + 1 < text.size(); ++i) {
            if (text[i] != '\n') continue;
            std::size_t j = i + 1;
            while (j < text.size() && (text[j] == ' ' || text[j] == '\t' || text[j] == '\r')) ++j;
            if (j < text.size() && text[j] == '\n') {
                sep = i;
                sep_end = j + 1;
                while (sep_end < text.size() && text[sep_end] == '\n') ++sep_end;
                break;
            }
        }
        std::string_view piece = (sep == std::string_view::npos) ? text.substr(pos)
                                                                 : text.substr(pos, sep - pos);
        if (approx_token_count(piece) > 0) out.emplace_back(piece);
        if (sep == std::string_view::npos) break;
        pos = sep_end;
    }
    return out;
}

/// Sentence pieces on [.!?] + whitespace boundaries.
inline std::vector<std::string> split_sentences(std::string_view text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if ((c == '.' || c == '!' || c == '?') &&
            (i + 1 == text.size() || std::isspace(static_cast<unsigned char>(text[i + 1])))) {
            std::string_view piece = text.substr(start, i - start + 1);
            if (approx_token_count(piece) > 0) out.emplace_back(piece);
            start = i + 1;
        }
    }
    if (start < text.size()) {
        std::string_view rest = text.substr(start);
        if (approx_token_count(rest) > 0) out.emplace_back(rest);
    }
    return out;
}

inline std::vector<std::string> split_token_runs(std::string_view text, int max_tokens) {
    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t begin = i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i > begin) tokens.emplace_back(text.substr(begin, i - begin));
    }
    std::vector<std::string> out;
    for (std::size_t start = 0; start < tokens.size(); start += static_cast<std::size_t>(max_tokens)) {
        std::string run;
        std::size_t end = std::min(tokens.size(), start + static_cast<std::size_t>(max_tokens));
        for (std::size_t t = start; t < end; ++t) {
            if (!run.empty()) run.push_back(' ');
            run += tokens[t];
        }
        out.push_back(std::move(run));
    }
    return out;
}

/// Greedy packing of pieces into chunks of at most max_tokens, joined by sep.
/// Pieces are assumed to individually fit.
inline void pack_pieces(const std::vector<std::string>& pieces, int max_tokens,
                        const std::string& sep, std::vector<std::string>& out) {
    std::string current;
    std::int64_t current_tokens = 0;
    for (const auto& piece : pieces) {
        std::int64_t piece_tokens = approx_token_count(piece);
        if (!current.empty() && current_tokens + piece_tokens > max_tokens) {
            out.push_back(std::move(current));
            current.clear();
            current_tokens = 0;
        }
        if (current.empty()) {
            current = piece;
        } else {
            current += sep;
            current += piece;
        }
        current_tokens += piece_tokens;
    }
    if (!current.empty()) out.push_back(std::move(current));
}

}  // namespace detail

/// Greedy split on paragraph boundaries, falling back to sentences and then to
/// plain token runs. No chunk exceeds max_chunk_tokens under the whitespace
/// tokenizer; the token stream of the chunks, in order, equals that of the
/// input. Empty text yields a single empty chunk (callers flag it).
inline std::vector<TextChunk> chunk_document(const std::string& text, int max_chunk_tokens) {
    if (max_chunk_tokens < 16) throw std::invalid_argument("max_chunk_tokens must be >= 16");

    if (approx_token_count(text) <= max_chunk_tokens) return {TextChunk{0, text}};

    std::vector<std::string> pieces;
    for (const auto& paragraph : detail::split_paragraphs(text)) {
        if (approx_token_count(paragraph) <= max_chunk_tokens) {
            pieces.push_back(paragraph);
            continue;
        }
        for (const auto& sentence : detail::split_sentences(paragraph)) {
            if (approx_token_count(sentence) <= max_chunk_tokens) {
                pieces.push_back(sentence);
                continue;
            }
            for (auto& run : detail::split_token_runs(sentence, max_chunk_tokens))
                pieces.push_back(std::move(run));
        }
    }

    // Pack whole paragraphs together when they fit; mixed pieces join with a
    // blank line so paragraph boundaries stay visible in the chunk text.
    std::vector<std::string> packed;
    detail::pack_pieces(pieces, max_chunk_tokens, "\n\n", packed);

    std::vector<TextChunk> chunks;
    chunks.reserve(packed.size());
    int id = 0;
    for (auto& chunk_text : packed) chunks.push_back(TextChunk{id++, std::move(chunk_text)});
    return chunks;
}

}  // namespace impress
