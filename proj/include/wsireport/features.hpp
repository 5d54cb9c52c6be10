#pragma once

#include "wsireport/image.hpp"
#include "wsireport/patching.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

namespace wsireport {

/// Patch-to-vector encoder. Implementations must be deterministic:
/// identical patch bytes yield identical vectors.
class PatchEncoder {
  public:
    virtual ~PatchEncoder() = default;
    virtual int dim() const = 0;
    virtual std::vector<float> encode(const RgbImage& patch) const = 0;
};

/// Deterministic stand-in for a real visual encoder: hashes the patch
/// bytes, expands the hash into D uniform values in [-1,1] with a
/// counter-based generator, and scales to unit Euclidean norm.
class StubEncoder : public PatchEncoder {
  public:
    explicit StubEncoder(int dim);
    int dim() const override { return dim_; }
    std::vector<float> encode(const RgbImage& patch) const override;

  private:
    int dim_;
};

struct FeatureMeta {
    uint16_t level = 0;
    uint32_t x = 0;
    uint32_t y = 0;
    float focus = 0.0f;
    float tissue_fraction = 0.0f;
};

/// N x D feature bank, rows aligned with `meta`. Immutable once built.
struct FeatureMatrix {
    int64_t n = 0;
    int dim = 0;
    std::vector<float> data; // n*dim, row-major
    std::vector<FeatureMeta> meta;

    const float* row(int64_t i) const { return data.data() + i * dim; }
    void validate() const;
};

/// Reads the pixels behind one selected patch record.
using RegionReader = std::function<RgbImage(const PatchRecord&)>;

/// Encodes the selected records in their given order; row i is the
/// encoding of record i. Encoder failures are reported with the
/// offending record's coordinates. `jobs` > 1 encodes in parallel with
/// a deterministic merge.
FeatureMatrix build_feature_matrix(const std::vector<PatchRecord>& records,
                                   const RegionReader& reader, const PatchEncoder& enc,
                                   int jobs = 1);

/// Feature store I/O. Little-endian: magic "WSIF", u16 version = 1,
/// u16 reserved, u32 dim, u64 n; n records of (u16 level, u32 x, u32 y,
/// f32 focus, f32 tissue_fraction); n*dim f32 row-major; CRC32 of all
/// preceding bytes.
void write_store(const FeatureMatrix& m, const std::filesystem::path& path);
FeatureMatrix read_store(const std::filesystem::path& path);

} // namespace wsireport
