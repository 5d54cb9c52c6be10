#include "wsireport/patching.hpp"
#include "wsireport/errors.hpp"
#include "wsireport/rng.hpp"
#include "wsireport/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace wsireport {

void QualityParams::validate() const {
    if (patch_size < 3)
        throw ValidationError("patch_size must be >= 3");
    if (stride < 1)
        throw ValidationError("stride must be >= 1");
    if (min_tissue < 0 || min_tissue > 1 || dark_frac_max < 0 || dark_frac_max > 1)
        throw ValidationError("tissue/dark fractions must be in [0,1]");
    if (v_min < 0 || v_max > 255 || v_min > v_max || s_min < 0 || s_min > 255)
        throw ValidationError("exposure bounds must lie within the 8-bit scale");
    if (dark_intensity < 0 || dark_intensity > 255)
        throw ValidationError("dark_intensity must be in [0,255]");
    if (focus_min < 0)
        throw ValidationError("focus_min must be >= 0");
    if (max_patches < 0)
        throw ValidationError("max_patches must be >= 0");
    if (levels.empty())
        throw ValidationError("levels must be non-empty");
}

std::string to_string(RejectReason r) {
    switch (r) {
        case RejectReason::None: return "";
        case RejectReason::Tissue: return "tissue";
        case RejectReason::Focus: return "focus";
        case RejectReason::Underexposed: return "underexposed";
        case RejectReason::Overexposed: return "overexposed";
        case RejectReason::LowSaturation: return "low_saturation";
        case RejectReason::Dark: return "dark";
    }
    return "";
}

std::vector<std::pair<int64_t, int64_t>> grid_candidates(int64_t level_w, int64_t level_h,
                                                         const QualityParams& p) {
    std::vector<std::pair<int64_t, int64_t>> out;
    for (int64_t y = 0; y + p.patch_size <= level_h; y += p.stride)
        for (int64_t x = 0; x + p.patch_size <= level_w; x += p.stride)
            out.emplace_back(x, y);
    return out;
}

double tissue_fraction(const BinaryMask& mask_region) {
    if (mask_region.width < 1 || mask_region.height < 1)
        throw ValidationError("tissue_fraction requires a non-empty mask region");
    int64_t ones = 0;
    for (uint8_t b : mask_region.bits)
        ones += b;
    return static_cast<double>(ones) /
           (static_cast<double>(mask_region.width) * mask_region.height);
}

GrayImage grayscale(const RgbImage& patch) {
    GrayImage out(patch.width, patch.height);
    for (size_t i = 0; i < patch.pixel_count(); ++i) {
        const uint8_t* px = patch.pixels.data() + i * 3;
        double luma = 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
        out.pixels[i] = static_cast<uint8_t>(std::floor(luma + 0.5));
    }
    return out;
}

double laplacian_variance(const GrayImage& gray) {
    if (gray.width < 3 || gray.height < 3)
        throw ValidationError("laplacian_variance requires at least a 3x3 image");
    const int w = gray.width;
    const int h = gray.height;
    const int64_t n = static_cast<int64_t>(w - 2) * (h - 2);

    // Responses are integers; accumulate exactly and form the population
    // variance as E[r^2] - E[r]^2 evaluated in double.
    int64_t sum = 0;
    int64_t sum_sq = 0;
    for (int y = 1; y + 1 < h; ++y) {
        for (int x = 1; x + 1 < w; ++x) {
            int64_t r = static_cast<int64_t>(gray.at(x, y - 1)) + gray.at(x, y + 1) +
                        gray.at(x - 1, y) + gray.at(x + 1, y) -
                        4 * static_cast<int64_t>(gray.at(x, y));
            sum += r;
            sum_sq += r * r;
        }
    }
    double mean = static_cast<double>(sum) / static_cast<double>(n);
    return static_cast<double>(sum_sq) / static_cast<double>(n) - mean * mean;
}

ExposureStats exposure_check(const RgbImage& patch, const QualityParams& p) {
    if (patch.width < 1 || patch.height < 1)
        throw ValidationError("exposure_check requires a non-empty patch");
    int64_t sum_v = 0;
    int64_t sum_s = 0;
    for (size_t i = 0; i < patch.pixel_count(); ++i) {
        const uint8_t* px = patch.pixels.data() + i * 3;
        auto [hh, s, v] = rgb_to_hsv(px[0], px[1], px[2]);
        (void)hh;
        sum_v += v;
        sum_s += s;
    }
    ExposureStats st;
    double n = static_cast<double>(patch.pixel_count());
    st.mean_v = static_cast<double>(sum_v) / n;
    st.mean_s = static_cast<double>(sum_s) / n;
    if (st.mean_v < p.v_min)
        st.verdict = RejectReason::Underexposed;
    else if (st.mean_v > p.v_max)
        st.verdict = RejectReason::Overexposed;
    else if (st.mean_s < p.s_min)
        st.verdict = RejectReason::LowSaturation;
    return st;
}

double dark_fraction(const GrayImage& gray, const QualityParams& p) {
    if (gray.width < 1 || gray.height < 1)
        throw ValidationError("dark_fraction requires a non-empty image");
    int64_t dark = 0;
    for (uint8_t g : gray.pixels)
        dark += g < p.dark_intensity ? 1 : 0;
    return static_cast<double>(dark) / static_cast<double>(gray.pixels.size());
}

PatchRecord evaluate_patch(const RgbImage& patch, const BinaryMask& mask_region,
                           const QualityParams& p) {
    if (patch.width != p.patch_size || patch.height != p.patch_size)
        throw ValidationError("patch must be " + std::to_string(p.patch_size) + "x" +
                              std::to_string(p.patch_size));
    if (mask_region.width != p.patch_size || mask_region.height != p.patch_size)
        throw ValidationError("mask region must match the patch size");

    PatchRecord rec;
    rec.tissue_fraction = tissue_fraction(mask_region);
    GrayImage gray = grayscale(patch);
    rec.focus = laplacian_variance(gray);
    ExposureStats exp = exposure_check(patch, p);
    rec.mean_v = exp.mean_v;
    rec.mean_s = exp.mean_s;
    rec.dark_fraction = dark_fraction(gray, p);

    if (!(rec.tissue_fraction > p.min_tissue))
        rec.reason = RejectReason::Tissue;
    else if (rec.focus < p.focus_min)
        rec.reason = RejectReason::Focus;
    else if (exp.verdict != RejectReason::None)
        rec.reason = exp.verdict;
    else if (rec.dark_fraction > p.dark_frac_max)
        rec.reason = RejectReason::Dark;
    rec.accepted = rec.reason == RejectReason::None;
    return rec;
}

int64_t sample_quota(int64_t n_valid, int64_t total_valid, int64_t budget) {
    if (total_valid <= 0)
        return 0;
    int64_t proportional = budget * n_valid / total_valid; // floor
    return std::min(n_valid, proportional);
}

std::map<int, std::vector<PatchRecord>> stratified_sample(
    const std::map<int, std::vector<PatchRecord>>& valid, const QualityParams& p) {
    int64_t total = 0;
    for (const auto& [level, recs] : valid)
        total += static_cast<int64_t>(recs.size());

    if (total <= p.max_patches)
        return valid;

    std::mt19937_64 rng(p.seed);
    std::map<int, std::vector<PatchRecord>> out;
    for (const auto& [level, recs] : valid) {
        int64_t want = sample_quota(static_cast<int64_t>(recs.size()), total, p.max_patches);
        // Selection sampling (Knuth algorithm S): scan once, keep each
        // record with probability needed/remaining. Preserves input order.
        std::vector<PatchRecord> kept;
        kept.reserve(static_cast<size_t>(want));
        int64_t needed = want;
        int64_t remaining = static_cast<int64_t>(recs.size());
        for (const auto& rec : recs) {
            if (needed == 0)
                break;
            double u = unit_uniform(rng);
            if (u * static_cast<double>(remaining) < static_cast<double>(needed)) {
                kept.push_back(rec);
                --needed;
            }
            --remaining;
        }
        out[level] = std::move(kept);
    }
    return out;
}

namespace {

RejectReason reason_from_string(const std::string& s) {
    for (RejectReason r : {RejectReason::None, RejectReason::Tissue, RejectReason::Focus,
                           RejectReason::Underexposed, RejectReason::Overexposed,
                           RejectReason::LowSaturation, RejectReason::Dark})
        if (to_string(r) == s)
            return r;
    throw ValidationError("unknown reject reason '" + s + "'");
}

std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

} // namespace

void write_patch_csv(const std::vector<PatchRecord>& records,
                     const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw IoError("cannot open for writing: " + path.string());
    out << "level,x,y,tissue_fraction,focus,mean_v,mean_s,dark_fraction,verdict,reason\n";
    for (const auto& r : records) {
        out << r.level << ',' << r.x << ',' << r.y << ',' << fmt6(r.tissue_fraction) << ','
            << fmt6(r.focus) << ',' << fmt6(r.mean_v) << ',' << fmt6(r.mean_s) << ','
            << fmt6(r.dark_fraction) << ',' << (r.accepted ? "accepted" : "rejected") << ','
            << to_string(r.reason) << "\n";
    }
    if (!out)
        throw IoError("write failed: " + path.string());
}

std::vector<PatchRecord> read_patch_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open: " + path.string());
    std::string line;
    if (!std::getline(in, line))
        throw ValidationError("patch CSV is empty: " + path.string());
    std::vector<PatchRecord> out;
    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        std::stringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ','))
            fields.push_back(field);
        if (fields.size() < 9 || fields.size() > 10)
            throw ValidationError("patch CSV line " + std::to_string(lineno) +
                                  " has the wrong field count: " + path.string());
        try {
            PatchRecord r;
            r.level = std::stoi(fields[0]);
            r.x = std::stoll(fields[1]);
            r.y = std::stoll(fields[2]);
            r.tissue_fraction = std::stod(fields[3]);
            r.focus = std::stod(fields[4]);
            r.mean_v = std::stod(fields[5]);
            r.mean_s = std::stod(fields[6]);
            r.dark_fraction = std::stod(fields[7]);
            r.accepted = fields[8] == "accepted";
            if (!r.accepted && fields[8] != "rejected")
                throw ValidationError("bad verdict '" + fields[8] + "'");
            r.reason = fields.size() == 10 ? reason_from_string(fields[9]) : RejectReason::None;
            out.push_back(r);
        } catch (const ValidationError&) {
            throw;
        } catch (const std::exception&) {
            throw ValidationError("patch CSV line " + std::to_string(lineno) +
                                  " is malformed: " + path.string());
        }
    }
    return out;
}

} // namespace wsireport
