#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <json.hpp>

#include "specstat/core/types.hpp"
#include "specstat/dist/dist.hpp"
#include "specstat/parallel.hpp"

namespace specstat::phantom {

// One segmentation class and the speckle distribution its pixels draw from.
struct RegionSpec {
    core::ClassId cls = core::ClassId::Background;
    dist::DistParams params;
};

// Band center depth as a polynomial in the normalized column t = x/(width-1),
// coefficients in pixels.
struct Band {
    std::vector<double> center_coeffs;
    double thickness = 0.0;

    double center_at(double t) const {
        double c = 0.0, tp = 1.0;
        for (double coeff : center_coeffs) {
            c += coeff * tp;
            tp *= t;
        }
        return c;
    }
};

// Tilted bar in the vitreous above the ILM, optionally casting a straight
// shadow of background-distributed pixels on everything beneath it.
struct Tool {
    bool present = false;
    double center_row = 0.0;
    double center_col = 0.0;
    double length = 0.0;
    double thickness = 0.0;
    double angle_deg = 0.0;
    bool shadow = true;
};

struct PhantomConfig {
    int height = 0;
    int width = 0;
    Band ilm_band;
    Band rpe_band;
    Tool tool;
    RegionSpec background;
    RegionSpec ilm;
    RegionSpec rpe;
    RegionSpec tool_region;
    double geometry_jitter = 0.0;

    // ILM strictly above RPE at every column, bands inside the image, tool
    // above the ILM when present.
    void validate() const;
};

enum class Preset { TrainGeometry, ShiftedGeometry };

// Both presets share the same RegionSpecs; shifted_geometry models a new eye:
// band depths moved >= 60 px, curvature sign flipped, thickness +-40%, tool
// displaced.
PhantomConfig default_config(Preset preset);

// Per-pixel class by geometry, intensity drawn from that class's distribution
// with a counter-based stream per pixel, so row-parallel generation is
// deterministic. Returns exact ground-truth masks for ILM, RPE, Tool.
std::pair<core::BScan, std::vector<core::LabelMap>> generate(const PhantomConfig& config,
                                                             std::uint64_t seed,
                                                             Exec exec = Exec::Parallel);

// Jitters band curves and tool placement within the configured amplitude;
// deltas are halved until the invariants hold again. Distributions untouched.
PhantomConfig perturb(const PhantomConfig& config, std::uint64_t seed);

nlohmann::json to_json(const PhantomConfig& config);
PhantomConfig config_from_json(const nlohmann::json& j);

} // namespace specstat::phantom
