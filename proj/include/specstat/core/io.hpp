#pragma once

#include <filesystem>
#include <vector>

#include "specstat/core/types.hpp"

namespace specstat::core {

// Binary PGM (P5). 8-bit and 16-bit payloads are supported; 16-bit samples are
// big-endian per the PGM convention. Values are loaded as reals in [0, maxval].
BScan load_pgm(const std::filesystem::path& path);

// Saves a scan as P5. maxval must be 255 or 65535; values are rounded and
// clamped to [0, maxval].
void save_pgm(const BScan& scan, const std::filesystem::path& path, int maxval = 65535);

// P5, maxval 255, 255 where mask is set. Round-trips through load_label_pgm.
void save_label_pgm(const LabelMap& map, const std::filesystem::path& path);
LabelMap load_label_pgm(const std::filesystem::path& path, ClassId cls);

// CSV layout: one header line `<family>,<param_name>,<rows>,<cols>`, then one
// line per row with cols comma-separated values, `nan` at invalid cells.
// Values are written with 17 significant digits so the round trip is bitwise
// lossless.
void save_param_csv(const ParameterMap& map, const std::filesystem::path& path);
ParameterMap load_param_csv(const std::filesystem::path& path);

// 16-bit PGM holding probabilities in [0,1] scaled to [0,65535].
void save_prob_pgm(const std::vector<double>& probs, int height, int width,
                   const std::filesystem::path& path);

} // namespace specstat::core
