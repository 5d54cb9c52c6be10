#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace wsireport {

/// Row-major 8-bit RGB image. Pixel buffer length is width*height*3.
struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> pixels;

    RgbImage() = default;
    RgbImage(int w, int h) : width(w), height(h), pixels(static_cast<size_t>(w) * h * 3, 0) {}

    const uint8_t* at(int x, int y) const {
        return pixels.data() + (static_cast<size_t>(y) * width + x) * 3;
    }
    uint8_t* at(int x, int y) {
        return pixels.data() + (static_cast<size_t>(y) * width + x) * 3;
    }
    void set(int x, int y, uint8_t r, uint8_t g, uint8_t b) {
        uint8_t* p = at(x, y);
        p[0] = r;
        p[1] = g;
        p[2] = b;
    }
    size_t pixel_count() const { return static_cast<size_t>(width) * height; }
};

/// Row-major 8-bit single-channel image.
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> pixels;

    GrayImage() = default;
    GrayImage(int w, int h) : width(w), height(h), pixels(static_cast<size_t>(w) * h, 0) {}

    uint8_t at(int x, int y) const { return pixels[static_cast<size_t>(y) * width + x]; }
    uint8_t& at(int x, int y) { return pixels[static_cast<size_t>(y) * width + x]; }
};

/// Row-major binary mask; values are 0 or 1.
struct BinaryMask {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> bits;

    BinaryMask() = default;
    BinaryMask(int w, int h) : width(w), height(h), bits(static_cast<size_t>(w) * h, 0) {}

    uint8_t at(int x, int y) const { return bits[static_cast<size_t>(y) * width + x]; }
    uint8_t& at(int x, int y) { return bits[static_cast<size_t>(y) * width + x]; }

    bool operator==(const BinaryMask& o) const {
        return width == o.width && height == o.height && bits == o.bits;
    }
};

/// Visual-debug dump: binary PGM (P5), 0 -> 0 and 1 -> 255.
void write_mask_pgm(const BinaryMask& mask, const std::filesystem::path& path);

} // namespace wsireport
