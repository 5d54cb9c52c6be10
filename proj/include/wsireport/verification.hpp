#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace wsireport {

/// Text-to-vector provider. Implementations must be deterministic:
/// identical text yields identical vectors.
class EmbeddingProvider {
  public:
    virtual ~EmbeddingProvider() = default;
    virtual int dim() const = 0;
    virtual std::vector<float> embed(const std::string& text) const = 0;
};

/// Deterministic test embedder: hashes tokens into signed buckets and
/// unit-normalizes, so token overlap yields positive similarity.
class MockEmbedder : public EmbeddingProvider {
  public:
    explicit MockEmbedder(int dim);
    int dim() const override { return dim_; }
    std::vector<float> embed(const std::string& text) const override;

  private:
    int dim_;
};

/// Looks vectors up from an embedding store written offline by any
/// external tool; the record key is the exact text. Unknown text is an
/// error.
class PrecomputedEmbedder : public EmbeddingProvider {
  public:
    explicit PrecomputedEmbedder(const std::filesystem::path& store_path);
    int dim() const override { return dim_; }
    std::vector<float> embed(const std::string& text) const override;

  private:
    int dim_ = 0;
    std::vector<std::pair<std::string, std::vector<float>>> entries_;
};

struct CorpusEntry {
    std::string id;
    std::string text;
    std::vector<float> embedding;
};

/// Reference reports with their embeddings. Ids are unique; embeddings
/// share one dimension.
struct ReferenceCorpus {
    std::vector<CorpusEntry> entries;
    int dim = 0;

    void validate() const;
};

/// Loads a `id<TAB>report` TSV and embeds every report with `provider`.
ReferenceCorpus load_corpus_tsv(const std::filesystem::path& path,
                                const EmbeddingProvider& provider);

struct VerificationResult {
    std::string final_text;
    bool replaced = false;
    std::string best_id;
    double best_similarity = 0.0;
};

/// Index and cosine similarity of the corpus entry nearest to `query`;
/// earlier entries win ties.
std::pair<size_t, double> nearest(const std::vector<float>& query,
                                  const ReferenceCorpus& corpus);

/// Embeds the generated text, finds the nearest reference, and replaces
/// the text when similarity strictly exceeds tau; otherwise the original
/// generation is retained.
VerificationResult verify_or_replace(const std::string& generated,
                                     const ReferenceCorpus& corpus,
                                     const EmbeddingProvider& provider, double tau);

/// Embedding store I/O. Little-endian: magic "EMB1", u16 version = 1,
/// u32 dim, u64 n, then n records of (u32 key length, key bytes, dim f32
/// values), CRC32 of all preceding bytes.
void write_embedding_store(const std::vector<std::pair<std::string, std::vector<float>>>& entries,
                           int dim, const std::filesystem::path& path);
std::vector<std::pair<std::string, std::vector<float>>> read_embedding_store(
    const std::filesystem::path& path, int* dim_out = nullptr);

} // namespace wsireport
