#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <vector>

namespace wsireport {

// Composite weights: 0.15*(ROUGE + BLEU) + 0.4*keyword + 0.3*embedding.
inline constexpr double kWeightRouge = 0.15;
inline constexpr double kWeightBleu = 0.15;
inline constexpr double kWeightKeyword = 0.4;
inline constexpr double kWeightEmbedding = 0.3;

struct ScoreBreakdown {
    double rouge = 0.0;
    double bleu = 0.0;
    double keyword = 0.0;
    double embedding = 0.0;
    double composite = 0.0;
};

/// Clinical keyword extraction policy: with a non-empty term list only
/// listed tokens count; otherwise every token of length >= 2 that is not
/// a stopword counts.
struct KeywordLexicon {
    std::set<std::string> terms;
    std::set<std::string> stopwords;

    static KeywordLexicon load(const std::filesystem::path& terms_path,
                               const std::filesystem::path& stopwords_path);
    void validate() const; // the two sets must be disjoint
};

/// BLEU-4: geometric mean of clipped n-gram precisions (n = 1..4) with
/// add-one smoothing of zero numerators for n >= 2, times the brevity
/// penalty exp(min(0, 1 - |ref|/|gen|)). Empty generation scores 0.
double bleu(const std::vector<std::string>& gen, const std::vector<std::string>& ref);

/// ROUGE-L F1 over the token-level longest common subsequence.
double rouge(const std::vector<std::string>& gen, const std::vector<std::string>& ref);

std::set<std::string> extract_keywords(const std::string& text, const KeywordLexicon& lex);

/// Jaccard similarity; two empty sets count as identical (1.0).
double keyword_score(const std::set<std::string>& gen, const std::set<std::string>& ref);

/// Cosine similarity, no clamping. Zero vectors and dimension mismatches
/// are errors.
double embedding_score(const std::vector<float>& e_gen, const std::vector<float>& e_ref);

ScoreBreakdown composite(double rouge_s, double bleu_s, double keyword_s, double embedding_s);

} // namespace wsireport
