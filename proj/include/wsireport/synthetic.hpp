#pragma once

#include "wsireport/pyramid.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace wsireport {

/// Procedural slide description. Geometry is in base-level (level 0)
/// pixel coordinates; the generator renders the base image and derives
/// every requested level by repeated 2x2 box-mean halving, so levels are
/// mutually consistent by construction.
struct SyntheticSpec {
    int64_t base_width = 0;
    int64_t base_height = 0;
    std::vector<int> levels;
    uint64_t seed = 0;

    std::array<uint8_t, 3> background{255, 255, 255};
    std::array<uint8_t, 3> tissue_color{199, 21, 133};
    std::array<uint8_t, 3> dark_color{8, 8, 8};
    int noise_amplitude = 56; // per-pixel luminance jitter inside tissue blobs

    struct Blob {
        int64_t cx = 0, cy = 0, r = 0;
    };
    struct Rect {
        int64_t x = 0, y = 0, w = 0, h = 0;
    };

    std::vector<Blob> tissue_blobs; // textured tissue (passes the focus filter)
    std::vector<Rect> blur_rects;   // flat tissue color, no texture (fails focus)
    std::vector<Rect> dark_rects;   // near-black artifact regions
};

/// Parses the JSON synthetic-slide description used by `make-synthetic`.
SyntheticSpec load_synthetic_spec(const std::filesystem::path& path);

/// Renders the slide, writes per-level PNGs plus `pyramid.json` into
/// `out_dir`, and returns the loaded (validated) source.
PyramidSource write_synthetic_pyramid(const SyntheticSpec& spec,
                                      const std::filesystem::path& out_dir);

} // namespace wsireport
