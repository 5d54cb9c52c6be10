#pragma once

#include "wsireport/image.hpp"

#include <filesystem>

namespace wsireport {

/// Reads an 8-bit RGB PNG. Other bit depths or color types are rejected.
RgbImage read_png(const std::filesystem::path& path);

/// Writes an 8-bit RGB PNG with fixed encoder settings so identical
/// pixels produce identical files.
void write_png(const RgbImage& img, const std::filesystem::path& path);

} // namespace wsireport
