#include "specstat/fitgrid/fitgrid.hpp"

#include <algorithm>

namespace specstat::fitgrid {

PatchGrid tile(const core::BScan& scan, int patch_size) {
    require(patch_size >= 3, "InvalidParams", "patch size must be >= 3");
    require(scan.height >= patch_size && scan.width >= patch_size, "ScanTooSmall",
            "scan smaller than one patch");

    PatchGrid grid;
    grid.patch_size = patch_size;
    grid.rows = scan.height / patch_size;
    grid.cols = scan.width / patch_size;
    grid.patches.resize(static_cast<std::size_t>(grid.rows) * grid.cols);

    for (int r = 0; r < grid.rows; ++r) {
        for (int c = 0; c < grid.cols; ++c) {
            auto& cell = grid.patches[static_cast<std::size_t>(r) * grid.cols + c];
            cell.reserve(static_cast<std::size_t>(patch_size) * patch_size);
            for (int y = r * patch_size; y < (r + 1) * patch_size; ++y)
                for (int x = c * patch_size; x < (c + 1) * patch_size; ++x)
                    cell.push_back(scan.at(y, x));
        }
    }
    return grid;
}

std::vector<core::ParameterMap> fit_patches(const PatchGrid& grid, dist::Family family,
                                            Exec exec) {
    const auto names = dist::reported_param_names(family);
    std::vector<core::ParameterMap> maps;
    maps.reserve(names.size());
    for (const auto& name : names)
        maps.push_back(core::ParameterMap::make(dist::to_string(family), name, grid.rows, grid.cols));

    const std::int64_t n_cells = static_cast<std::int64_t>(grid.rows) * grid.cols;
    // per-cell fits are independent; each cell writes only its own slot in each
    // map, so the result cannot depend on scheduling
    parallel_for_dynamic(
        n_cells,
        [&](std::int64_t idx) {
            const auto& samples = grid.patches[static_cast<std::size_t>(idx)];
            try {
                dist::MLEResult fit = dist::mle_fit(family, samples);
                auto values = dist::reported_param_values(fit.params);
                for (std::size_t p = 0; p < values.size(); ++p) {
                    maps[p].values[static_cast<std::size_t>(idx)] = values[p];
                    maps[p].valid[static_cast<std::size_t>(idx)] = 1;
                }
            } catch (const Error&) {
                for (auto& map : maps) {
                    map.values[static_cast<std::size_t>(idx)] = 0.0;
                    map.valid[static_cast<std::size_t>(idx)] = 0;
                }
            }
        },
        exec);
    return maps;
}

std::vector<double> upsample_to_pixels(const core::ParameterMap& map, int scan_height,
                                       int scan_width, int patch_size) {
    require(map.rows == scan_height / patch_size && map.cols == scan_width / patch_size,
            "DimensionMismatch", "parameter map inconsistent with scan dims under the floor rule");
    std::vector<double> out(static_cast<std::size_t>(scan_height) * scan_width, 0.0);
    for (int y = 0; y < scan_height; ++y) {
        const int r = std::min(y / patch_size, map.rows - 1);
        for (int x = 0; x < scan_width; ++x) {
            const int c = std::min(x / patch_size, map.cols - 1);
            if (map.is_valid(r, c))
                out[static_cast<std::size_t>(y) * scan_width + x] = map.at(r, c);
        }
    }
    return out;
}

} // namespace specstat::fitgrid
