#pragma once

#include "wsireport/image.hpp"

#include <cstdint>
#include <tuple>

namespace wsireport {

struct SegmentationParams {
    int tau_s = 20;  // saturation threshold, 8-bit scale
    int tau_v = 30;  // value threshold, 8-bit scale
    int kernel = 5;  // odd square structuring-element side

    void validate() const;
};

/// 8-bit HSV: V = max(r,g,b); S = 0 when V = 0, else round(255*(V-min)/V);
/// H uses the hexcone formula scaled to [0,180). Rounding is half-up.
/// H is computed for completeness but nothing downstream consumes it.
std::tuple<uint8_t, uint8_t, uint8_t> rgb_to_hsv(uint8_t r, uint8_t g, uint8_t b);

/// Per-pixel tissue test: S > tau_s AND V > tau_v, both strict.
BinaryMask tissue_mask(const RgbImage& img, const SegmentationParams& p);

/// Morphological erosion with a square element; out-of-image is background.
BinaryMask erode(const BinaryMask& m, int kernel);

/// Morphological dilation with a square element; out-of-image is background.
BinaryMask dilate(const BinaryMask& m, int kernel);

/// Opening followed by closing:
/// erode(dilate(dilate(erode(m)))) with the element from `p`.
BinaryMask refine_mask(const BinaryMask& m, const SegmentationParams& p);

} // namespace wsireport
