#pragma once

#include "wsireport/image.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace wsireport {

/// Patch selection and quality-filter configuration. Defaults are the
/// pipeline preset.
struct QualityParams {
    int patch_size = 256;
    int stride = 256;
    double min_tissue = 0.1;      // keep iff tissue fraction strictly above
    double focus_min = 40.0;      // reject iff Laplacian variance strictly below
    double v_min = 40.0;          // mean V below fails (strict)
    double v_max = 245.0;         // mean V above fails (strict)
    double s_min = 12.0;          // mean S below fails (strict)
    int dark_intensity = 30;      // gray level strictly below counts as dark
    double dark_frac_max = 0.2;   // reject iff dark fraction strictly above
    int max_patches = 2500;
    std::vector<int> levels{6, 5, 4, 3};
    uint64_t seed = 0;

    void validate() const;
};

enum class RejectReason {
    None,
    Tissue,
    Focus,
    Underexposed,
    Overexposed,
    LowSaturation,
    Dark,
};

std::string to_string(RejectReason r);

/// One evaluated grid candidate. Coordinates are level-local pixels.
/// Every measurement is recorded even when an earlier criterion already
/// rejected the patch.
struct PatchRecord {
    int level = 0;
    int64_t x = 0;
    int64_t y = 0;
    double tissue_fraction = 0.0;
    double focus = 0.0;
    double mean_v = 0.0;
    double mean_s = 0.0;
    double dark_fraction = 0.0;
    bool accepted = false;
    RejectReason reason = RejectReason::None;
};

/// All grid positions (i*stride, j*stride) whose full patch fits the level,
/// row-major; partial edge tiles are dropped.
std::vector<std::pair<int64_t, int64_t>> grid_candidates(int64_t level_w, int64_t level_h,
                                                         const QualityParams& p);

/// Tissue coverage of a patch-sized mask region: sum(bits) / (w*h).
double tissue_fraction(const BinaryMask& mask_region);

/// Luma grayscale: round(0.299 R + 0.587 G + 0.114 B), half-up.
GrayImage grayscale(const RgbImage& patch);

/// Variance of the 3x3 Laplacian response over interior pixels only
/// (valid convolution); population variance.
double laplacian_variance(const GrayImage& gray);

struct ExposureStats {
    double mean_v = 0.0;
    double mean_s = 0.0;
    RejectReason verdict = RejectReason::None; // None means pass
};

/// Mean HSV V and S as exact real means; fails outside the configured
/// bounds. Boundary values pass: mean V of exactly v_min or v_max is fine,
/// mean S of exactly s_min is fine.
ExposureStats exposure_check(const RgbImage& patch, const QualityParams& p);

/// Fraction of pixels strictly darker than p.dark_intensity.
double dark_fraction(const GrayImage& gray, const QualityParams& p);

/// Applies tissue, focus, exposure and dark-fraction criteria in that
/// order; the verdict is the first failure.
PatchRecord evaluate_patch(const RgbImage& patch, const BinaryMask& mask_region,
                           const QualityParams& p);

/// Budgeted stratified sampling across levels. If the total valid count
/// fits the budget everything is kept; otherwise each level keeps
/// min(n_valid, floor(budget * n_valid / total)) records drawn uniformly
/// without replacement. Deterministic per seed; within a level the kept
/// records stay in input order.
std::map<int, std::vector<PatchRecord>> stratified_sample(
    const std::map<int, std::vector<PatchRecord>>& valid, const QualityParams& p);

/// The literal per-level quota: min(n_valid, floor(budget*n_valid/total)).
/// Exposed so callers and tests can check counts without sampling.
int64_t sample_quota(int64_t n_valid, int64_t total_valid, int64_t budget);

/// Patch report CSV with columns
/// level,x,y,tissue_fraction,focus,mean_v,mean_s,dark_fraction,verdict,reason.
void write_patch_csv(const std::vector<PatchRecord>& records,
                     const std::filesystem::path& path);
std::vector<PatchRecord> read_patch_csv(const std::filesystem::path& path);

} // namespace wsireport
