#include "wsireport/verification.hpp"
#include "wsireport/binio.hpp"
#include "wsireport/errors.hpp"
#include "wsireport/rng.hpp"
#include "wsireport/text.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace wsireport {

MockEmbedder::MockEmbedder(int dim) : dim_(dim) {
    if (dim < 1)
        throw ValidationError("embedding dim must be >= 1");
}

std::vector<float> MockEmbedder::embed(const std::string& text) const {
    auto tokens = normalize_tokens(text);
    if (tokens.empty())
        throw ValidationError("cannot embed empty text");
    std::vector<double> acc(static_cast<size_t>(dim_), 0.0);
    for (const auto& tok : tokens) {
        uint64_t h = fnv1a64(tok);
        size_t bucket = static_cast<size_t>(h % static_cast<uint64_t>(dim_));
        double sign = (h >> 63) ? -1.0 : 1.0;
        acc[bucket] += sign;
    }
    double norm_sq = 0.0;
    for (double v : acc)
        norm_sq += v * v;
    if (norm_sq == 0.0)
        throw ValidationError("text hashed to a zero embedding");
    double norm = std::sqrt(norm_sq);
    std::vector<float> out(static_cast<size_t>(dim_));
    for (size_t i = 0; i < acc.size(); ++i)
        out[i] = static_cast<float>(acc[i] / norm);
    return out;
}

PrecomputedEmbedder::PrecomputedEmbedder(const std::filesystem::path& store_path) {
    entries_ = read_embedding_store(store_path, &dim_);
}

std::vector<float> PrecomputedEmbedder::embed(const std::string& text) const {
    for (const auto& [key, vec] : entries_)
        if (key == text)
            return vec;
    throw ValidationError("no precomputed embedding for the given text");
}

void ReferenceCorpus::validate() const {
    if (entries.empty())
        throw ValidationError("reference corpus is empty");
    std::set<std::string> seen;
    for (const auto& e : entries) {
        if (!seen.insert(e.id).second)
            throw ValidationError("duplicate corpus id: " + e.id);
        if (static_cast<int>(e.embedding.size()) != dim)
            throw ValidationError("corpus embedding dimension mismatch for id " + e.id);
    }
}

ReferenceCorpus load_corpus_tsv(const std::filesystem::path& path,
                                const EmbeddingProvider& provider) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open corpus: " + path.string());
    ReferenceCorpus corpus;
    corpus.dim = provider.dim();
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        size_t tab = line.find('\t');
        if (tab == std::string::npos)
            throw ValidationError("corpus line " + std::to_string(lineno) +
                                  " is not id<TAB>report: " + path.string());
        CorpusEntry e;
        e.id = line.substr(0, tab);
        e.text = line.substr(tab + 1);
        e.embedding = provider.embed(e.text);
        corpus.entries.push_back(std::move(e));
    }
    corpus.validate();
    return corpus;
}

std::pair<size_t, double> nearest(const std::vector<float>& query,
                                  const ReferenceCorpus& corpus) {
    corpus.validate();
    if (static_cast<int>(query.size()) != corpus.dim)
        throw ValidationError("query dimension does not match the corpus");
    double qn = 0.0;
    for (float v : query)
        qn += static_cast<double>(v) * v;
    if (qn == 0.0)
        throw ValidationError("query embedding is the zero vector");
    qn = std::sqrt(qn);

    size_t best = 0;
    double best_sim = -2.0;
    for (size_t i = 0; i < corpus.entries.size(); ++i) {
        const auto& e = corpus.entries[i].embedding;
        double dot = 0.0;
        double en = 0.0;
        for (size_t j = 0; j < e.size(); ++j) {
            dot += static_cast<double>(query[j]) * e[j];
            en += static_cast<double>(e[j]) * e[j];
        }
        if (en == 0.0)
            throw ValidationError("corpus embedding " + corpus.entries[i].id +
                                  " is the zero vector");
        double sim = dot / (qn * std::sqrt(en));
        if (sim > best_sim) { // strict: earlier entries win ties
            best_sim = sim;
            best = i;
        }
    }
    return {best, best_sim};
}

VerificationResult verify_or_replace(const std::string& generated,
                                     const ReferenceCorpus& corpus,
                                     const EmbeddingProvider& provider, double tau) {
    auto [idx, sim] = nearest(provider.embed(generated), corpus);
    VerificationResult res;
    res.best_id = corpus.entries[idx].id;
    res.best_similarity = sim;
    if (sim > tau) { // strictly exceeds
        res.replaced = true;
        res.final_text = corpus.entries[idx].text;
    } else {
        res.replaced = false;
        res.final_text = generated;
    }
    return res;
}

void write_embedding_store(const std::vector<std::pair<std::string, std::vector<float>>>& entries,
                           int dim, const std::filesystem::path& path) {
    if (dim < 1)
        throw ValidationError("embedding store dim must be >= 1");
    ByteWriter w;
    w.put_magic("EMB1");
    w.put_u16(1); // version
    w.put_u32(static_cast<uint32_t>(dim));
    w.put_u64(entries.size());
    for (const auto& [key, vec] : entries) {
        if (static_cast<int>(vec.size()) != dim)
            throw ValidationError("embedding store record has wrong dimension: " + key);
        w.put_u32(static_cast<uint32_t>(key.size()));
        w.put_bytes(key.data(), key.size());
        for (float f : vec)
            w.put_f32(f);
    }
    w.finish_with_crc();
    w.write_file(path);
}

std::vector<std::pair<std::string, std::vector<float>>> read_embedding_store(
    const std::filesystem::path& path, int* dim_out) {
    ByteReader r = ByteReader::from_file(path);
    r.reserve_trailing_crc();
    r.expect_magic("EMB1", "embedding store");
    uint16_t version = r.get_u16();
    if (version != 1)
        throw ValidationError("unsupported embedding store version " + std::to_string(version) +
                              ": " + path.string());
    int dim = static_cast<int>(r.get_u32());
    uint64_t n = r.get_u64();
    if (dim < 1)
        throw ValidationError("embedding store dim out of range: " + path.string());
    std::vector<std::pair<std::string, std::vector<float>>> out;
    out.reserve(n);
    for (uint64_t i = 0; i < n; ++i) {
        uint32_t klen = r.get_u32();
        auto kb = r.get_bytes(klen);
        std::string key(kb.begin(), kb.end());
        std::vector<float> vec(static_cast<size_t>(dim));
        for (auto& f : vec)
            f = r.get_f32();
        out.emplace_back(std::move(key), std::move(vec));
    }
    if (r.remaining() != 0)
        throw ValidationError("embedding store has trailing bytes: " + path.string());
    r.verify_crc("embedding store");
    if (dim_out)
        *dim_out = dim;
    return out;
}

} // namespace wsireport
