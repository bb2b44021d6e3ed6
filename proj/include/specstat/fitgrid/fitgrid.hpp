#pragma once

#include <vector>

#include "specstat/core/types.hpp"
#include "specstat/dist/dist.hpp"
#include "specstat/parallel.hpp"

namespace specstat::fitgrid {

inline constexpr int kDefaultPatchSize = 7;

// Non-overlapping tiling of a scan. Trailing rows/columns that do not fill a
// whole patch are discarded (floor rule).
struct PatchGrid {
    int patch_size = kDefaultPatchSize;
    int rows = 0;
    int cols = 0;
    std::vector<std::vector<double>> patches; // rows*cols cells of patch_size^2 samples

    const std::vector<double>& at(int r, int c) const {
        return patches[static_cast<std::size_t>(r) * cols + c];
    }
};

PatchGrid tile(const core::BScan& scan, int patch_size = kDefaultPatchSize);

// Fits the family per patch; one ParameterMap per reported parameter of the
// family, cells where the fit errors marked invalid. Deterministic regardless
// of the execution policy.
std::vector<core::ParameterMap> fit_patches(const PatchGrid& grid, dist::Family family,
                                            Exec exec = Exec::Parallel);

// Patch-replication upsampling to pixel resolution: every pixel takes its
// patch's value, margin pixels take the nearest patch, invalid cells become 0.
std::vector<double> upsample_to_pixels(const core::ParameterMap& map, int scan_height,
                                       int scan_width, int patch_size = kDefaultPatchSize);

} // namespace specstat::fitgrid
