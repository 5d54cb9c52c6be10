#include "wsireport/segmentation.hpp"
#include "wsireport/errors.hpp"

#include <algorithm>
#include <cmath>

namespace wsireport {

void SegmentationParams::validate() const {
    if (tau_s < 0 || tau_s > 255 || tau_v < 0 || tau_v > 255)
        throw ValidationError("segmentation thresholds must be in [0,255]");
    if (kernel < 1 || kernel % 2 == 0)
        throw ValidationError("structuring element side must be odd and >= 1");
}

std::tuple<uint8_t, uint8_t, uint8_t> rgb_to_hsv(uint8_t r, uint8_t g, uint8_t b) {
    int v = std::max({r, g, b});
    int mn = std::min({r, g, b});
    int c = v - mn;

    // round-half-up of 255*c/v in pure integer arithmetic
    int s = v == 0 ? 0 : (510 * c + v) / (2 * v);

    int h = 0;
    if (c != 0) {
        double deg;
        if (v == r)
            deg = 60.0 * (g - b) / c;
        else if (v == g)
            deg = 60.0 * (b - r) / c + 120.0;
        else
            deg = 60.0 * (r - g) / c + 240.0;
        if (deg < 0)
            deg += 360.0;
        h = static_cast<int>(std::floor(deg / 2.0 + 0.5)) % 180;
    }
    return {static_cast<uint8_t>(h), static_cast<uint8_t>(s), static_cast<uint8_t>(v)};
}

BinaryMask tissue_mask(const RgbImage& img, const SegmentationParams& p) {
    p.validate();
    if (img.width < 1 || img.height < 1)
        throw ValidationError("tissue_mask requires a non-empty image");
    BinaryMask out(img.width, img.height);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const uint8_t* px = img.at(x, y);
            auto [h, s, v] = rgb_to_hsv(px[0], px[1], px[2]);
            (void)h;
            out.at(x, y) = (s > p.tau_s && v > p.tau_v) ? 1 : 0;
        }
    }
    return out;
}

namespace {

enum class Morph { Erode, Dilate };

BinaryMask morph(const BinaryMask& m, int kernel, Morph op) {
    if (kernel < 1 || kernel % 2 == 0)
        throw ValidationError("structuring element side must be odd and >= 1");
    const int rad = kernel / 2;
    BinaryMask out(m.width, m.height);
    for (int y = 0; y < m.height; ++y) {
        for (int x = 0; x < m.width; ++x) {
            bool all_one = true;
            bool any_one = false;
            for (int dy = -rad; dy <= rad && (all_one || !any_one); ++dy) {
                for (int dx = -rad; dx <= rad; ++dx) {
                    int nx = x + dx;
                    int ny = y + dy;
                    // out-of-image neighbors count as background
                    bool bit = nx >= 0 && ny >= 0 && nx < m.width && ny < m.height &&
                               m.at(nx, ny) != 0;
                    all_one = all_one && bit;
                    any_one = any_one || bit;
                }
            }
            out.at(x, y) = op == Morph::Erode ? (all_one ? 1 : 0) : (any_one ? 1 : 0);
        }
    }
    return out;
}

} // namespace

BinaryMask erode(const BinaryMask& m, int kernel) { return morph(m, kernel, Morph::Erode); }

BinaryMask dilate(const BinaryMask& m, int kernel) { return morph(m, kernel, Morph::Dilate); }

BinaryMask refine_mask(const BinaryMask& m, const SegmentationParams& p) {
    p.validate();
    return erode(dilate(dilate(erode(m, p.kernel), p.kernel), p.kernel), p.kernel);
}

} // namespace wsireport
