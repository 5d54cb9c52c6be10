#include "wsireport/synthetic.hpp"
#include "wsireport/errors.hpp"
#include "wsireport/png_io.hpp"
#include "wsireport/rng.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

namespace wsireport {

namespace {

uint8_t clamp_channel(int64_t v) {
    return static_cast<uint8_t>(std::clamp<int64_t>(v, 0, 255));
}

bool in_rect(const SyntheticSpec::Rect& r, int64_t x, int64_t y) {
    return x >= r.x && x < r.x + r.w && y >= r.y && y < r.y + r.h;
}

bool in_blob(const SyntheticSpec::Blob& b, int64_t x, int64_t y) {
    int64_t dx = x - b.cx;
    int64_t dy = y - b.cy;
    return dx * dx + dy * dy <= b.r * b.r;
}

RgbImage render_base(const SyntheticSpec& spec) {
    RgbImage img(static_cast<int>(spec.base_width), static_cast<int>(spec.base_height));
    const int amp = spec.noise_amplitude;
    for (int64_t y = 0; y < spec.base_height; ++y) {
        for (int64_t x = 0; x < spec.base_width; ++x) {
            uint8_t* px = img.at(static_cast<int>(x), static_cast<int>(y));
            bool painted = false;
            for (const auto& r : spec.dark_rects) {
                if (in_rect(r, x, y)) {
                    px[0] = spec.dark_color[0];
                    px[1] = spec.dark_color[1];
                    px[2] = spec.dark_color[2];
                    painted = true;
                    break;
                }
            }
            if (painted) continue;
            for (const auto& r : spec.blur_rects) {
                if (in_rect(r, x, y)) {
                    px[0] = spec.tissue_color[0];
                    px[1] = spec.tissue_color[1];
                    px[2] = spec.tissue_color[2];
                    painted = true;
                    break;
                }
            }
            if (painted) continue;
            for (const auto& b : spec.tissue_blobs) {
                if (in_blob(b, x, y)) {
                    // Order-independent texture: one hash draw per pixel,
                    // equal offset on all channels so saturation survives.
                    int64_t d = 0;
                    if (amp > 0) {
                        double u = counter_uniform(spec.seed,
                                                   static_cast<uint64_t>(y) *
                                                           static_cast<uint64_t>(spec.base_width) +
                                                       static_cast<uint64_t>(x));
                        d = static_cast<int64_t>(u * (2 * amp + 1)) - amp;
                    }
                    px[0] = clamp_channel(spec.tissue_color[0] + d);
                    px[1] = clamp_channel(spec.tissue_color[1] + d);
                    px[2] = clamp_channel(spec.tissue_color[2] + d);
                    painted = true;
                    break;
                }
            }
            if (!painted) {
                px[0] = spec.background[0];
                px[1] = spec.background[1];
                px[2] = spec.background[2];
            }
        }
    }
    return img;
}

// One halving step: 2x2 box mean, round-half-up per channel. Trailing
// odd row/column is dropped, matching the floor in the level formula.
RgbImage box_halve(const RgbImage& src) {
    int w = src.width / 2;
    int h = src.height / 2;
    RgbImage out(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const uint8_t* p00 = src.at(2 * x, 2 * y);
            const uint8_t* p10 = src.at(2 * x + 1, 2 * y);
            const uint8_t* p01 = src.at(2 * x, 2 * y + 1);
            const uint8_t* p11 = src.at(2 * x + 1, 2 * y + 1);
            uint8_t* q = out.at(x, y);
            for (int c = 0; c < 3; ++c)
                q[c] = static_cast<uint8_t>((p00[c] + p10[c] + p01[c] + p11[c] + 2) / 4);
        }
    }
    return out;
}

std::array<uint8_t, 3> color_from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 3)
        throw ValidationError("color must be a 3-element array");
    return {j[0].get<uint8_t>(), j[1].get<uint8_t>(), j[2].get<uint8_t>()};
}

} // namespace

SyntheticSpec load_synthetic_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open synthetic spec: " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("synthetic spec parse error in " + path.string() + ": " + e.what());
    }

    SyntheticSpec spec;
    try {
        spec.base_width = doc.at("base_width").get<int64_t>();
        spec.base_height = doc.at("base_height").get<int64_t>();
        spec.levels = doc.at("levels").get<std::vector<int>>();
        spec.seed = doc.value("seed", 0ull);
        if (doc.contains("background")) spec.background = color_from_json(doc["background"]);
        if (doc.contains("tissue_color")) spec.tissue_color = color_from_json(doc["tissue_color"]);
        if (doc.contains("dark_color")) spec.dark_color = color_from_json(doc["dark_color"]);
        spec.noise_amplitude = doc.value("noise_amplitude", spec.noise_amplitude);
        for (const auto& b : doc.value("tissue_blobs", nlohmann::json::array()))
            spec.tissue_blobs.push_back({b.at("cx").get<int64_t>(), b.at("cy").get<int64_t>(),
                                         b.at("r").get<int64_t>()});
        for (const auto& r : doc.value("blur_rects", nlohmann::json::array()))
            spec.blur_rects.push_back({r.at("x").get<int64_t>(), r.at("y").get<int64_t>(),
                                       r.at("w").get<int64_t>(), r.at("h").get<int64_t>()});
        for (const auto& r : doc.value("dark_rects", nlohmann::json::array()))
            spec.dark_rects.push_back({r.at("x").get<int64_t>(), r.at("y").get<int64_t>(),
                                       r.at("w").get<int64_t>(), r.at("h").get<int64_t>()});
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("synthetic spec schema error in " + path.string() + ": " + e.what());
    }
    return spec;
}

PyramidSource write_synthetic_pyramid(const SyntheticSpec& spec,
                                      const std::filesystem::path& out_dir) {
    if (spec.base_width < 1 || spec.base_height < 1)
        throw ValidationError("synthetic base dimensions must be >= 1");
    if (spec.levels.empty())
        throw ValidationError("synthetic spec lists no levels");
    if (spec.noise_amplitude < 0 || spec.noise_amplitude > 127)
        throw ValidationError("noise_amplitude must be in [0,127]");

    std::vector<int> levels = spec.levels;
    std::sort(levels.begin(), levels.end());
    if (std::adjacent_find(levels.begin(), levels.end()) != levels.end())
        throw ValidationError("synthetic spec repeats a level");
    for (int l : levels)
        level_dims(spec.base_width, spec.base_height, l); // throws if too deep

    std::filesystem::create_directories(out_dir);

    nlohmann::json manifest;
    manifest["base_width"] = spec.base_width;
    manifest["base_height"] = spec.base_height;
    manifest["levels"] = nlohmann::json::array();

    RgbImage current = render_base(spec);
    int current_level = 0;
    for (int l : levels) {
        while (current_level < l) {
            current = box_halve(current);
            ++current_level;
        }
        std::string name = "level_" + std::to_string(l) + ".png";
        write_png(current, out_dir / name);
        manifest["levels"].push_back({{"level", l},
                                      {"width", current.width},
                                      {"height", current.height},
                                      {"image", name}});
    }

    std::ofstream out(out_dir / "pyramid.json", std::ios::trunc);
    if (!out)
        throw IoError("cannot open for writing: " + (out_dir / "pyramid.json").string());
    out << manifest.dump(2) << "\n";
    out.close();

    return load_manifest(out_dir / "pyramid.json");
}

} // namespace wsireport
