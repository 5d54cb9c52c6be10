#pragma once

#include "wsireport/image.hpp"

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

namespace wsireport {

struct LevelEntry {
    int level = 0;
    int width = 0;
    int height = 0;
    std::string image_path; // relative to the slide root
};

/// A multi-resolution slide: a manifest plus one plain RGB image per level.
/// Level l holds the base image downsampled by 2^l. Immutable after load;
/// safe for concurrent reads.
class PyramidSource {
  public:
    int64_t base_width() const { return base_width_; }
    int64_t base_height() const { return base_height_; }
    const std::vector<LevelEntry>& levels() const { return levels_; }
    const std::filesystem::path& root() const { return root_; }

    bool has_level(int level) const;
    const LevelEntry& entry(int level) const;
    const RgbImage& level_image(int level) const;

    friend PyramidSource load_manifest(const std::filesystem::path& path);

  private:
    int64_t base_width_ = 0;
    int64_t base_height_ = 0;
    std::vector<LevelEntry> levels_;
    std::vector<RgbImage> images_; // aligned with levels_
    std::filesystem::path root_;
};

/// Dimensions of pyramid level `level` for a base of (base_w, base_h):
/// floor(base / 2^level) each. Throws if either collapses to zero.
std::pair<int64_t, int64_t> level_dims(int64_t base_w, int64_t base_h, int level);

/// Loads and fully validates a slide from its `pyramid.json` manifest.
/// Checks declared dimensions against the level formula and against the
/// actual image files.
PyramidSource load_manifest(const std::filesystem::path& path);

/// Serializes the manifest back to JSON (stable key order and formatting).
void write_manifest(const PyramidSource& src, const std::filesystem::path& path);

/// Exact sub-image of one level, row-major. Region must lie fully inside.
RgbImage read_region(const PyramidSource& src, int level, int64_t x, int64_t y,
                     int64_t w, int64_t h);

/// The whole level image (the thumbnail of this artifact is the level itself).
RgbImage thumbnail(const PyramidSource& src, int level);

} // namespace wsireport
