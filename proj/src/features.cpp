#include "wsireport/features.hpp"
#include "wsireport/binio.hpp"
#include "wsireport/errors.hpp"
#include "wsireport/rng.hpp"

#include <cmath>
#include <thread>

namespace wsireport {

StubEncoder::StubEncoder(int dim) : dim_(dim) {
    if (dim < 1)
        throw ValidationError("encoder dim must be >= 1");
}

std::vector<float> StubEncoder::encode(const RgbImage& patch) const {
    uint64_t h = fnv1a64(patch.pixels.data(), patch.pixels.size());
    std::vector<double> v(static_cast<size_t>(dim_));
    double norm_sq = 0.0;
    for (int i = 0; i < dim_; ++i) {
        double u = counter_uniform(h, static_cast<uint64_t>(i));
        v[static_cast<size_t>(i)] = 2.0 * u - 1.0;
        norm_sq += v[static_cast<size_t>(i)] * v[static_cast<size_t>(i)];
    }
    double norm = std::sqrt(norm_sq);
    std::vector<float> out(static_cast<size_t>(dim_));
    if (norm == 0.0) {
        out[0] = 1.0f; // unreachable in practice; keep the unit-norm contract
        return out;
    }
    for (int i = 0; i < dim_; ++i)
        out[static_cast<size_t>(i)] = static_cast<float>(v[static_cast<size_t>(i)] / norm);
    return out;
}

void FeatureMatrix::validate() const {
    if (n < 0 || dim < 1)
        throw ValidationError("feature matrix must have n >= 0 and dim >= 1");
    if (data.size() != static_cast<size_t>(n) * static_cast<size_t>(dim))
        throw ValidationError("feature data length does not match n*dim");
    if (meta.size() != static_cast<size_t>(n))
        throw ValidationError("feature metadata length does not match n");
    if (n > 2500)
        throw ValidationError("feature matrix exceeds the 2500-patch budget");
}

FeatureMatrix build_feature_matrix(const std::vector<PatchRecord>& records,
                                   const RegionReader& reader, const PatchEncoder& enc,
                                   int jobs) {
    FeatureMatrix m;
    m.n = static_cast<int64_t>(records.size());
    m.dim = enc.dim();
    m.data.resize(static_cast<size_t>(m.n) * m.dim);
    m.meta.resize(static_cast<size_t>(m.n));

    auto encode_one = [&](size_t i) {
        const PatchRecord& rec = records[i];
        std::vector<float> v;
        try {
            v = enc.encode(reader(rec));
        } catch (const std::exception& e) {
            throw ValidationError("encoding failed for patch level=" + std::to_string(rec.level) +
                                  " x=" + std::to_string(rec.x) + " y=" + std::to_string(rec.y) +
                                  ": " + e.what());
        }
        if (static_cast<int>(v.size()) != m.dim)
            throw ValidationError("encoder returned a vector of wrong dimension");
        std::copy(v.begin(), v.end(), m.data.begin() + static_cast<int64_t>(i) * m.dim);
        m.meta[i] = {static_cast<uint16_t>(rec.level), static_cast<uint32_t>(rec.x),
                     static_cast<uint32_t>(rec.y), static_cast<float>(rec.focus),
                     static_cast<float>(rec.tissue_fraction)};
    };

    if (jobs <= 1 || records.size() < 2) {
        for (size_t i = 0; i < records.size(); ++i)
            encode_one(i);
        return m;
    }

    // Rows are written to disjoint, index-determined slots, so the result
    // is identical to the single-threaded one.
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<size_t>(jobs));
    for (int t = 0; t < jobs; ++t) {
        pool.emplace_back([&, t]() {
            try {
                for (size_t i = static_cast<size_t>(t); i < records.size();
                     i += static_cast<size_t>(jobs))
                    encode_one(i);
            } catch (...) {
                errors[static_cast<size_t>(t)] = std::current_exception();
            }
        });
    }
    for (auto& th : pool)
        th.join();
    for (const auto& e : errors)
        if (e)
            std::rethrow_exception(e);
    return m;
}

void write_store(const FeatureMatrix& m, const std::filesystem::path& path) {
    m.validate();
    ByteWriter w;
    w.put_magic("WSIF");
    w.put_u16(1); // version
    w.put_u16(0); // reserved
    w.put_u32(static_cast<uint32_t>(m.dim));
    w.put_u64(static_cast<uint64_t>(m.n));
    for (const auto& meta : m.meta) {
        w.put_u16(meta.level);
        w.put_u32(meta.x);
        w.put_u32(meta.y);
        w.put_f32(meta.focus);
        w.put_f32(meta.tissue_fraction);
    }
    for (float f : m.data)
        w.put_f32(f);
    w.finish_with_crc();
    w.write_file(path);
}

FeatureMatrix read_store(const std::filesystem::path& path) {
    ByteReader r = ByteReader::from_file(path);
    r.reserve_trailing_crc();
    r.expect_magic("WSIF", "feature store");
    uint16_t version = r.get_u16();
    if (version != 1)
        throw ValidationError("unsupported feature store version " + std::to_string(version) +
                              ": " + path.string());
    r.get_u16(); // reserved
    FeatureMatrix m;
    m.dim = static_cast<int>(r.get_u32());
    m.n = static_cast<int64_t>(r.get_u64());
    if (m.dim < 1 || m.n < 0 || m.n > 2500)
        throw ValidationError("feature store header out of range: " + path.string());
    m.meta.resize(static_cast<size_t>(m.n));
    for (auto& meta : m.meta) {
        meta.level = r.get_u16();
        meta.x = r.get_u32();
        meta.y = r.get_u32();
        meta.focus = r.get_f32();
        meta.tissue_fraction = r.get_f32();
    }
    m.data.resize(static_cast<size_t>(m.n) * m.dim);
    for (auto& f : m.data)
        f = r.get_f32();
    if (r.remaining() != 0)
        throw ValidationError("feature store has trailing bytes: " + path.string());
    r.verify_crc("feature store");
    return m;
}

} // namespace wsireport
