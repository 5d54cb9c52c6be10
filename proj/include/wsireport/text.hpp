#pragma once

#include <cctype>
#include <string>
#include <vector>

namespace wsireport {

/// Shared text normalizer: lowercase, split on whitespace, and split
/// punctuation into single-character tokens. Used by the tokenizer, the
/// metrics, and the mock embedder so they all agree on token boundaries.
inline std::vector<std::string> normalize_tokens(const std::string& text) {
    std::vector<std::string> out;
    std::string word;
    auto flush = [&]() {
        if (!word.empty()) {
            out.push_back(word);
            word.clear();
        }
    };
    for (unsigned char c : text) {
        if (std::isspace(c)) {
            flush();
        } else if (std::ispunct(c)) {
            flush();
            out.emplace_back(1, static_cast<char>(c));
        } else {
            word.push_back(static_cast<char>(std::tolower(c)));
        }
    }
    flush();
    return out;
}

} // namespace wsireport
