#pragma once

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

namespace wsireport {

// Reserved vocabulary ids; content ids start at 4.
inline constexpr int kPadId = 0;
inline constexpr int kBosId = 1;
inline constexpr int kEosId = 2;
inline constexpr int kUnkId = 3;

/// Word-level vocabulary backed by a text file: one token per line,
/// line number = id, first four lines reserved for PAD/BOS/EOS/UNK.
class Vocab {
  public:
    static Vocab load(const std::filesystem::path& path);

    /// Builds a vocabulary from content tokens (specials prepended).
    static Vocab from_tokens(const std::vector<std::string>& content_tokens);

    void save(const std::filesystem::path& path) const;

    int size() const { return static_cast<int>(id_to_token_.size()); }
    int id_of(const std::string& token) const; // kUnkId when absent
    const std::string& token_of(int id) const;

  private:
    std::vector<std::string> id_to_token_;
    std::unordered_map<std::string, int> token_to_id_;
};

/// Normalizes text and maps each token to its id; unknowns become UNK.
/// No BOS/EOS are added here.
std::vector<int> tokenize(const std::string& text, const Vocab& vocab);

/// Joins the tokens of `ids` with single spaces.
std::string detokenize(const std::vector<int>& ids, const Vocab& vocab);

} // namespace wsireport
