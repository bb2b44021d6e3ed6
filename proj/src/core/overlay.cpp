#include "specstat/core/overlay.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace specstat::core {

namespace {

struct Tint {
    double r, g, b;
};

Tint class_tint(ClassId c) {
    switch (c) {
    case ClassId::ILM: return {0, 255, 0};
    case ClassId::RPE: return {120, 200, 255};
    case ClassId::Tool: return {160, 32, 240};
    default: return {0, 0, 0};
    }
}

} // namespace

RgbImage overlay(const BScan& scan, const std::vector<LabelMap>& maps) {
    for (const auto& m : maps)
        require(m.height == scan.height && m.width == scan.width, "DimensionMismatch",
                "label map dimensions differ from scan");

    double maxv = 1.0;
    for (double v : scan.pixels)
        maxv = std::max(maxv, v);

    RgbImage img;
    img.height = scan.height;
    img.width = scan.width;
    img.rgb.assign(3 * scan.pixels.size(), 0);

    const std::size_t n = scan.pixels.size();
    for (std::size_t i = 0; i < n; ++i) {
        double gray = 255.0 * scan.pixels[i] / maxv;
        double r = gray, g = gray, b = gray;

        // priority Tool > ILM > RPE: pick the highest-priority class covering
        // this pixel, then alpha-blend its tint over the grayscale base.
        ClassId hit = ClassId::Background;
        int best = -1;
        for (const auto& m : maps) {
            if (!m.mask[i] || m.cls == ClassId::Background)
                continue;
            int prio = m.cls == ClassId::Tool ? 2 : (m.cls == ClassId::ILM ? 1 : 0);
            if (prio > best) {
                best = prio;
                hit = m.cls;
            }
        }
        if (hit != ClassId::Background) {
            Tint t = class_tint(hit);
            r = 0.45 * gray + 0.55 * t.r;
            g = 0.45 * gray + 0.55 * t.g;
            b = 0.45 * gray + 0.55 * t.b;
        }
        img.rgb[3 * i] = static_cast<std::uint8_t>(std::lround(std::clamp(r, 0.0, 255.0)));
        img.rgb[3 * i + 1] = static_cast<std::uint8_t>(std::lround(std::clamp(g, 0.0, 255.0)));
        img.rgb[3 * i + 2] = static_cast<std::uint8_t>(std::lround(std::clamp(b, 0.0, 255.0)));
    }
    return img;
}

void save_ppm(const RgbImage& image, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "IoFailure", "cannot open " + path.string() + " for writing");
    out << "P6\n" << image.width << " " << image.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.rgb.data()),
              static_cast<std::streamsize>(image.rgb.size()));
    require(out.good(), "IoFailure", "write failed: " + path.string());
}

} // namespace specstat::core
