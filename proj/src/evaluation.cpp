#include "wsireport/evaluation.hpp"
#include "wsireport/errors.hpp"
#include "wsireport/text.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

namespace wsireport {

KeywordLexicon KeywordLexicon::load(const std::filesystem::path& terms_path,
                                    const std::filesystem::path& stopwords_path) {
    auto read_set = [](const std::filesystem::path& p) {
        std::set<std::string> out;
        if (p.empty())
            return out;
        std::ifstream in(p);
        if (!in)
            throw IoError("cannot open lexicon file: " + p.string());
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r')
                line.pop_back();
            std::string lowered;
            for (unsigned char c : line)
                lowered.push_back(static_cast<char>(std::tolower(c)));
            if (!lowered.empty())
                out.insert(lowered);
        }
        return out;
    };
    KeywordLexicon lex;
    lex.terms = read_set(terms_path);
    lex.stopwords = read_set(stopwords_path);
    lex.validate();
    return lex;
}

void KeywordLexicon::validate() const {
    for (const auto& t : terms)
        if (stopwords.count(t))
            throw ValidationError("lexicon term '" + t + "' is also a stopword");
}

namespace {

// n-gram multiset counts keyed by joined tokens
std::map<std::string, int> ngram_counts(const std::vector<std::string>& toks, size_t n) {
    std::map<std::string, int> out;
    if (toks.size() < n)
        return out;
    for (size_t i = 0; i + n <= toks.size(); ++i) {
        std::string key;
        for (size_t j = 0; j < n; ++j) {
            if (j)
                key.push_back('\x1f');
            key += toks[i + j];
        }
        ++out[key];
    }
    return out;
}

} // namespace

double bleu(const std::vector<std::string>& gen, const std::vector<std::string>& ref) {
    if (gen.empty())
        return 0.0;
    double log_sum = 0.0;
    for (size_t n = 1; n <= 4; ++n) {
        auto gc = ngram_counts(gen, n);
        auto rc = ngram_counts(ref, n);
        int64_t clipped = 0;
        int64_t total = 0;
        for (const auto& [key, cnt] : gc) {
            total += cnt;
            auto it = rc.find(key);
            if (it != rc.end())
                clipped += std::min(cnt, it->second);
        }
        double p;
        if (n == 1) {
            if (clipped == 0)
                return 0.0; // no unigram overlap: BLEU is exactly zero
            p = static_cast<double>(clipped) / static_cast<double>(total);
        } else if (clipped == 0) {
            p = (static_cast<double>(clipped) + 1.0) / (static_cast<double>(total) + 1.0);
        } else {
            p = static_cast<double>(clipped) / static_cast<double>(total);
        }
        log_sum += 0.25 * std::log(p);
    }
    double bp = std::exp(std::min(0.0, 1.0 - static_cast<double>(ref.size()) /
                                            static_cast<double>(gen.size())));
    return bp * std::exp(log_sum);
}

double rouge(const std::vector<std::string>& gen, const std::vector<std::string>& ref) {
    if (gen.empty() || ref.empty())
        return 0.0;
    // LCS via the classic DP, two rolling rows
    const size_t n = gen.size();
    const size_t m = ref.size();
    std::vector<int> prev(m + 1, 0);
    std::vector<int> cur(m + 1, 0);
    for (size_t i = 1; i <= n; ++i) {
        for (size_t j = 1; j <= m; ++j) {
            if (gen[i - 1] == ref[j - 1])
                cur[j] = prev[j - 1] + 1;
            else
                cur[j] = std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    int lcs = prev[m];
    if (lcs == 0)
        return 0.0;
    double p = static_cast<double>(lcs) / static_cast<double>(n);
    double r = static_cast<double>(lcs) / static_cast<double>(m);
    return 2.0 * p * r / (p + r);
}

std::set<std::string> extract_keywords(const std::string& text, const KeywordLexicon& lex) {
    std::set<std::string> out;
    for (const auto& tok : normalize_tokens(text)) {
        if (!lex.terms.empty()) {
            if (lex.terms.count(tok))
                out.insert(tok);
        } else if (tok.size() >= 2 && !lex.stopwords.count(tok)) {
            out.insert(tok);
        }
    }
    return out;
}

double keyword_score(const std::set<std::string>& gen, const std::set<std::string>& ref) {
    if (gen.empty() && ref.empty())
        return 1.0;
    int64_t inter = 0;
    for (const auto& g : gen)
        inter += ref.count(g) ? 1 : 0;
    int64_t uni = static_cast<int64_t>(gen.size()) + static_cast<int64_t>(ref.size()) - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

double embedding_score(const std::vector<float>& e_gen, const std::vector<float>& e_ref) {
    if (e_gen.size() != e_ref.size() || e_gen.empty())
        throw ValidationError("embedding_score: dimension mismatch");
    double dot = 0.0;
    double na = 0.0;
    double nb = 0.0;
    for (size_t i = 0; i < e_gen.size(); ++i) {
        dot += static_cast<double>(e_gen[i]) * e_ref[i];
        na += static_cast<double>(e_gen[i]) * e_gen[i];
        nb += static_cast<double>(e_ref[i]) * e_ref[i];
    }
    if (na == 0.0 || nb == 0.0)
        throw ValidationError("embedding_score: zero vector");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

ScoreBreakdown composite(double rouge_s, double bleu_s, double keyword_s, double embedding_s) {
    ScoreBreakdown b;
    b.rouge = rouge_s;
    b.bleu = bleu_s;
    b.keyword = keyword_s;
    b.embedding = embedding_s;
    b.composite = kWeightRouge * (rouge_s + bleu_s) + kWeightKeyword * keyword_s +
                  kWeightEmbedding * embedding_s;
    return b;
}

} // namespace wsireport
