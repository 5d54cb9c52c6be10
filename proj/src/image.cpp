#include "wsireport/image.hpp"
#include "wsireport/errors.hpp"

#include <fstream>

namespace wsireport {

void write_mask_pgm(const BinaryMask& mask, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot open for writing: " + path.string());
    out << "P5\n" << mask.width << " " << mask.height << "\n255\n";
    std::vector<uint8_t> row(static_cast<size_t>(mask.width));
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x)
            row[static_cast<size_t>(x)] = mask.at(x, y) ? 255 : 0;
        out.write(reinterpret_cast<const char*>(row.data()), mask.width);
    }
    if (!out)
        throw IoError("write failed: " + path.string());
}

} // namespace wsireport
