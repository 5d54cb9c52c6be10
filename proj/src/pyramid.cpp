#include "wsireport/pyramid.hpp"
#include "wsireport/errors.hpp"
#include "wsireport/png_io.hpp"

#include <fstream>

#include <json.hpp>

namespace wsireport {

std::pair<int64_t, int64_t> level_dims(int64_t base_w, int64_t base_h, int level) {
    if (level < 0)
        throw ValidationError("level must be >= 0");
    if (base_w < 1 || base_h < 1)
        throw ValidationError("base dimensions must be >= 1");
    int64_t w = level < 63 ? (base_w >> level) : 0;
    int64_t h = level < 63 ? (base_h >> level) : 0;
    if (w == 0 || h == 0)
        throw ValidationError("level " + std::to_string(level) + " too deep for slide " +
                              std::to_string(base_w) + "x" + std::to_string(base_h));
    return {w, h};
}

bool PyramidSource::has_level(int level) const {
    for (const auto& e : levels_)
        if (e.level == level)
            return true;
    return false;
}

const LevelEntry& PyramidSource::entry(int level) const {
    for (const auto& e : levels_)
        if (e.level == level)
            return e;
    throw ValidationError("missing level " + std::to_string(level) + " in " + root_.string());
}

const RgbImage& PyramidSource::level_image(int level) const {
    for (size_t i = 0; i < levels_.size(); ++i)
        if (levels_[i].level == level)
            return images_[i];
    throw ValidationError("missing level " + std::to_string(level) + " in " + root_.string());
}

PyramidSource load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open manifest: " + path.string());

    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("manifest parse error in " + path.string() + ": " + e.what());
    }

    PyramidSource src;
    src.root_ = path.parent_path();
    try {
        src.base_width_ = doc.at("base_width").get<int64_t>();
        src.base_height_ = doc.at("base_height").get<int64_t>();
        for (const auto& lv : doc.at("levels")) {
            LevelEntry e;
            e.level = lv.at("level").get<int>();
            e.width = lv.at("width").get<int>();
            e.height = lv.at("height").get<int>();
            e.image_path = lv.at("image").get<std::string>();
            src.levels_.push_back(e);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("manifest schema error in " + path.string() + ": " + e.what());
    }

    if (src.base_width_ < 1 || src.base_height_ < 1)
        throw ValidationError("manifest base dimensions must be >= 1: " + path.string());
    if (src.levels_.empty())
        throw ValidationError("manifest declares no levels: " + path.string());

    for (size_t i = 0; i + 1 < src.levels_.size(); ++i)
        if (src.levels_[i].level >= src.levels_[i + 1].level)
            throw ValidationError("manifest levels must be unique and ascending: " + path.string());

    for (const auto& e : src.levels_) {
        auto [w, h] = level_dims(src.base_width_, src.base_height_, e.level);
        if (e.width != w || e.height != h)
            throw ValidationError("dimension mismatch at level " + std::to_string(e.level) +
                                  ": declared " + std::to_string(e.width) + "x" +
                                  std::to_string(e.height) + ", expected " + std::to_string(w) +
                                  "x" + std::to_string(h) + " (" + path.string() + ")");

        std::filesystem::path img_path = src.root_ / e.image_path;
        if (!std::filesystem::exists(img_path))
            throw IoError("missing level image: " + img_path.string());
        RgbImage img = read_png(img_path);
        if (img.width != e.width || img.height != e.height)
            throw ValidationError("level " + std::to_string(e.level) + " image is " +
                                  std::to_string(img.width) + "x" + std::to_string(img.height) +
                                  " but manifest declares " + std::to_string(e.width) + "x" +
                                  std::to_string(e.height) + " (" + img_path.string() + ")");
        src.images_.push_back(std::move(img));
    }
    return src;
}

void write_manifest(const PyramidSource& src, const std::filesystem::path& path) {
    nlohmann::json doc;
    doc["base_width"] = src.base_width();
    doc["base_height"] = src.base_height();
    doc["levels"] = nlohmann::json::array();
    for (const auto& e : src.levels()) {
        doc["levels"].push_back({{"level", e.level},
                                 {"width", e.width},
                                 {"height", e.height},
                                 {"image", e.image_path}});
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw IoError("cannot open for writing: " + path.string());
    out << doc.dump(2) << "\n";
    if (!out)
        throw IoError("write failed: " + path.string());
}

RgbImage read_region(const PyramidSource& src, int level, int64_t x, int64_t y,
                     int64_t w, int64_t h) {
    const RgbImage& img = src.level_image(level);
    if (w < 1 || h < 1)
        throw ValidationError("region dimensions must be >= 1");
    if (x < 0 || y < 0 || x + w > img.width || y + h > img.height)
        throw ValidationError("region out of bounds at level " + std::to_string(level) + ": (" +
                              std::to_string(x) + "," + std::to_string(y) + ") " +
                              std::to_string(w) + "x" + std::to_string(h) + " in " +
                              std::to_string(img.width) + "x" + std::to_string(img.height));

    RgbImage out(static_cast<int>(w), static_cast<int>(h));
    for (int64_t row = 0; row < h; ++row) {
        const uint8_t* sp = img.at(static_cast<int>(x), static_cast<int>(y + row));
        uint8_t* dp = out.at(0, static_cast<int>(row));
        std::copy(sp, sp + w * 3, dp);
    }
    return out;
}

RgbImage thumbnail(const PyramidSource& src, int level) {
    return src.level_image(level);
}

} // namespace wsireport
