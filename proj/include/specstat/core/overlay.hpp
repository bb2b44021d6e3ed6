#pragma once

#include <filesystem>
#include <vector>

#include "specstat/core/types.hpp"

namespace specstat::core {

// RGB rendering of a scan with class masks tinted on top: ILM green, RPE light
// blue, Tool purple. Overlapping pixels resolve by priority Tool > ILM > RPE
// (rendering only; evaluation always treats maps independently).
struct RgbImage {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> rgb; // 3 * height * width, interleaved
};

RgbImage overlay(const BScan& scan, const std::vector<LabelMap>& maps);

void save_ppm(const RgbImage& image, const std::filesystem::path& path);

} // namespace specstat::core
