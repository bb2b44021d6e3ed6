#include "specstat/phantom/phantom.hpp"

#include <algorithm>
#include <cmath>

#include "specstat/error.hpp"
#include "specstat/rng.hpp"

namespace specstat::phantom {

namespace {

constexpr double kDegToRad = 0.017453292519943295;

struct ToolGeometry {
    double ux, uy; // unit vector along the bar (x = column, y = row)
    double half_length;
    double half_thickness;

    bool contains(double col, double row, const Tool& t) const {
        const double qx = col - t.center_col;
        const double qy = row - t.center_row;
        const double along = qx * ux + qy * uy;
        const double across = -qx * uy + qy * ux;
        return std::fabs(along) <= half_length && std::fabs(across) <= half_thickness;
    }
};

ToolGeometry tool_geometry(const Tool& t) {
    ToolGeometry g;
    g.ux = std::cos(t.angle_deg * kDegToRad);
    g.uy = std::sin(t.angle_deg * kDegToRad);
    g.half_length = 0.5 * t.length;
    g.half_thickness = 0.5 * t.thickness;
    return g;
}

double band_top(const Band& b, double t) { return b.center_at(t) - 0.5 * b.thickness; }
double band_bottom(const Band& b, double t) { return b.center_at(t) + 0.5 * b.thickness; }

double tool_min_row(const Tool& t) {
    ToolGeometry g = tool_geometry(t);
    return t.center_row - std::fabs(g.uy) * g.half_length - std::fabs(g.ux) * g.half_thickness;
}

double tool_max_row(const Tool& t) {
    ToolGeometry g = tool_geometry(t);
    return t.center_row + std::fabs(g.uy) * g.half_length + std::fabs(g.ux) * g.half_thickness;
}

} // namespace

void PhantomConfig::validate() const {
    require(height >= 7 && width >= 7, "InvalidGeometry", "phantom must be at least 7x7");
    require(!ilm_band.center_coeffs.empty() && !rpe_band.center_coeffs.empty(), "InvalidGeometry",
            "band center polynomials must be non-empty");
    require(ilm_band.thickness > 0 && rpe_band.thickness > 0, "InvalidGeometry",
            "band thickness must be positive");
    for (int x = 0; x < width; ++x) {
        const double t = width > 1 ? static_cast<double>(x) / (width - 1) : 0.0;
        const double ilm_bot = band_bottom(ilm_band, t);
        const double rpe_top = band_top(rpe_band, t);
        require(band_top(ilm_band, t) >= 0.0 && band_bottom(rpe_band, t) <= height,
                "InvalidGeometry", "bands must lie inside the image");
        require(ilm_bot < rpe_top, "InvalidGeometry",
                "ILM band must be strictly above the RPE band at every column");
    }
    if (tool.present) {
        require(tool.length > 0 && tool.thickness > 0, "InvalidGeometry",
                "tool bar must have positive extent");
        require(tool_min_row(tool) >= 0.0, "InvalidGeometry", "tool must lie inside the image");
        // the tool floats in the vitreous: strictly above the ILM everywhere
        double max_row = tool_max_row(tool);
        for (int x = 0; x < width; ++x) {
            const double t = width > 1 ? static_cast<double>(x) / (width - 1) : 0.0;
            require(max_row < band_top(ilm_band, t), "InvalidGeometry",
                    "tool must stay above the ILM band");
        }
    }
    background.params.validate();
    ilm.params.validate();
    rpe.params.validate();
    if (tool.present)
        tool_region.params.validate();
}

PhantomConfig default_config(Preset preset) {
    PhantomConfig cfg;
    cfg.height = 512;
    cfg.width = 512;
    cfg.geometry_jitter = 12.0;

    // All-Gamma classes with disjoint shape ranges: background/ILM below 10,
    // RPE inside [10, 30], tool above 30. Scales are deliberately close so the
    // shape parameter carries the class signal.
    cfg.background = {core::ClassId::Background, dist::DistParams::gamma(1.8, 6.0)};
    cfg.ilm = {core::ClassId::ILM, dist::DistParams::gamma(7.0, 9.0)};
    cfg.rpe = {core::ClassId::RPE, dist::DistParams::gamma(20.0, 7.0)};
    cfg.tool_region = {core::ClassId::Tool, dist::DistParams::gamma(45.0, 6.0)};

    if (preset == Preset::TrainGeometry) {
        cfg.ilm_band = {{150.0, 40.0, -60.0}, 30.0};
        cfg.rpe_band = {{320.0, -30.0, 50.0}, 44.0};
        cfg.tool = {true, 70.0, 200.0, 180.0, 26.0, -8.0, true};
    } else {
        // new eye: depths shifted >= 60 px, curvature sign flipped, thickness
        // +-40%, displaced tool; identical RegionSpecs
        cfg.ilm_band = {{230.0, -40.0, 60.0}, 42.0};
        cfg.rpe_band = {{400.0, 30.0, -50.0}, 26.0};
        cfg.tool = {true, 110.0, 330.0, 180.0, 26.0, 10.0, true};
    }
    cfg.validate();
    return cfg;
}

std::pair<core::BScan, std::vector<core::LabelMap>> generate(const PhantomConfig& config,
                                                             std::uint64_t seed, Exec exec) {
    config.validate();
    const int h = config.height;
    const int w = config.width;

    // class grid by geometry: tool first, then bands everywhere the tool's
    // shadow does not occlude them (shadowed pixels stay Background)
    std::vector<core::ClassId> cls(static_cast<std::size_t>(h) * w, core::ClassId::Background);
    ToolGeometry tg = tool_geometry(config.tool);
    std::vector<int> shadow_from(w, h); // first shadowed row per column

    if (config.tool.present) {
        std::vector<int> lowest_tool_row(w, -1);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                if (tg.contains(x, y, config.tool)) {
                    cls[static_cast<std::size_t>(y) * w + x] = core::ClassId::Tool;
                    lowest_tool_row[x] = y;
                }
            }
        }
        if (config.tool.shadow) {
            for (int x = 0; x < w; ++x)
                if (lowest_tool_row[x] >= 0)
                    shadow_from[x] = lowest_tool_row[x] + 1;
        }
    }

    for (int x = 0; x < w; ++x) {
        const double t = w > 1 ? static_cast<double>(x) / (w - 1) : 0.0;
        const int ilm_lo = static_cast<int>(std::ceil(band_top(config.ilm_band, t)));
        const int ilm_hi = static_cast<int>(std::floor(band_bottom(config.ilm_band, t)));
        const int rpe_lo = static_cast<int>(std::ceil(band_top(config.rpe_band, t)));
        const int rpe_hi = static_cast<int>(std::floor(band_bottom(config.rpe_band, t)));
        const int shadow_start = shadow_from[x];
        for (int y = std::max(0, ilm_lo); y <= std::min(h - 1, ilm_hi); ++y)
            if (y < shadow_start)
                cls[static_cast<std::size_t>(y) * w + x] = core::ClassId::ILM;
        for (int y = std::max(0, rpe_lo); y <= std::min(h - 1, rpe_hi); ++y)
            if (y < shadow_start)
                cls[static_cast<std::size_t>(y) * w + x] = core::ClassId::RPE;
    }

    const dist::DistParams* params_by_class[core::kNumClasses] = {
        &config.background.params, &config.ilm.params, &config.rpe.params,
        &config.tool_region.params};

    core::BScan scan;
    scan.height = h;
    scan.width = w;
    scan.pixels.resize(cls.size());

    parallel_for(
        static_cast<std::int64_t>(cls.size()),
        [&](std::int64_t i) {
            Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
            const auto& p = *params_by_class[static_cast<int>(cls[static_cast<std::size_t>(i)])];
            scan.pixels[static_cast<std::size_t>(i)] = dist::draw(p, rng);
        },
        exec);

    std::vector<core::LabelMap> maps;
    for (auto fg : core::kForegroundClasses) {
        core::LabelMap m = core::LabelMap::empty(fg, h, w);
        for (std::size_t i = 0; i < cls.size(); ++i)
            m.mask[i] = cls[i] == fg ? 1 : 0;
        maps.push_back(std::move(m));
    }
    return {std::move(scan), std::move(maps)};
}

PhantomConfig perturb(const PhantomConfig& config, std::uint64_t seed) {
    config.validate();
    require(config.geometry_jitter >= 0.0, "InvalidGeometry", "geometry_jitter must be >= 0");
    const double a = config.geometry_jitter;

    Rng rng(seed);
    // one fixed draw layout so the same seed always perturbs the same way
    double d_ilm0 = rng.uniform(-a, a), d_ilm1 = rng.uniform(-a / 2, a / 2),
           d_ilm2 = rng.uniform(-a / 2, a / 2);
    double d_rpe0 = rng.uniform(-a, a), d_rpe1 = rng.uniform(-a / 2, a / 2),
           d_rpe2 = rng.uniform(-a / 2, a / 2);
    double d_row = rng.uniform(-a, a), d_col = rng.uniform(-2 * a, 2 * a),
           d_ang = rng.uniform(-a / 4, a / 4);

    // shrink the whole delta vector until the geometry is valid again
    for (double scale = 1.0;; scale *= 0.5) {
        PhantomConfig out = config;
        auto& ic = out.ilm_band.center_coeffs;
        auto& rc = out.rpe_band.center_coeffs;
        ic.resize(std::max<std::size_t>(ic.size(), 3), 0.0);
        rc.resize(std::max<std::size_t>(rc.size(), 3), 0.0);
        ic[0] += scale * d_ilm0;
        ic[1] += scale * d_ilm1;
        ic[2] += scale * d_ilm2;
        rc[0] += scale * d_rpe0;
        rc[1] += scale * d_rpe1;
        rc[2] += scale * d_rpe2;
        if (out.tool.present) {
            out.tool.center_row += scale * d_row;
            out.tool.center_col += scale * d_col;
            out.tool.angle_deg += scale * d_ang;
        }
        try {
            out.validate();
            return out;
        } catch (const Error&) {
            if (scale < 1e-9)
                return config; // the unperturbed config is valid by precondition
        }
    }
}

namespace {

nlohmann::json params_to_json(const dist::DistParams& p) {
    nlohmann::json j;
    j["family"] = dist::to_string(p.family);
    switch (p.family) {
    case dist::Family::Gamma: j["k"] = p.a; j["theta"] = p.b; break;
    case dist::Family::Rayleigh: j["sigma"] = p.a; break;
    case dist::Family::Normal: j["mu"] = p.a; j["sigma"] = p.b; break;
    case dist::Family::Burr: j["c"] = p.a; j["d"] = p.b; break;
    case dist::Family::Lognormal: j["s"] = p.a; j["mu_log"] = p.b; break;
    case dist::Family::Nakagami: j["nu"] = p.a; j["omega"] = p.b; break;
    }
    return j;
}

dist::DistParams params_from_json(const nlohmann::json& j) {
    auto family = dist::family_from_string(j.at("family").get<std::string>());
    switch (family) {
    case dist::Family::Gamma:
        return dist::DistParams::gamma(j.at("k").get<double>(), j.at("theta").get<double>());
    case dist::Family::Rayleigh:
        return dist::DistParams::rayleigh(j.at("sigma").get<double>());
    case dist::Family::Normal:
        return dist::DistParams::normal(j.at("mu").get<double>(), j.at("sigma").get<double>());
    case dist::Family::Burr:
        return dist::DistParams::burr(j.at("c").get<double>(), j.at("d").get<double>());
    case dist::Family::Lognormal:
        return dist::DistParams::lognormal(j.at("s").get<double>(), j.at("mu_log").get<double>());
    case dist::Family::Nakagami:
        return dist::DistParams::nakagami(j.at("nu").get<double>(), j.at("omega").get<double>());
    }
    fail("InvalidConfig", "unknown family in config");
}

nlohmann::json band_to_json(const Band& b) {
    return {{"center_coeffs", b.center_coeffs}, {"thickness", b.thickness}};
}

Band band_from_json(const nlohmann::json& j) {
    Band b;
    b.center_coeffs = j.at("center_coeffs").get<std::vector<double>>();
    b.thickness = j.at("thickness").get<double>();
    return b;
}

} // namespace

nlohmann::json to_json(const PhantomConfig& config) {
    nlohmann::json j;
    j["height"] = config.height;
    j["width"] = config.width;
    j["ilm_band"] = band_to_json(config.ilm_band);
    j["rpe_band"] = band_to_json(config.rpe_band);
    j["tool"] = {{"present", config.tool.present},     {"center_row", config.tool.center_row},
                 {"center_col", config.tool.center_col}, {"length", config.tool.length},
                 {"thickness", config.tool.thickness},   {"angle_deg", config.tool.angle_deg},
                 {"shadow", config.tool.shadow}};
    j["regions"] = {{"background", params_to_json(config.background.params)},
                    {"ilm", params_to_json(config.ilm.params)},
                    {"rpe", params_to_json(config.rpe.params)},
                    {"tool", params_to_json(config.tool_region.params)}};
    j["geometry_jitter"] = config.geometry_jitter;
    return j;
}

PhantomConfig config_from_json(const nlohmann::json& j) {
    PhantomConfig cfg;
    try {
        cfg.height = j.at("height").get<int>();
        cfg.width = j.at("width").get<int>();
        cfg.ilm_band = band_from_json(j.at("ilm_band"));
        cfg.rpe_band = band_from_json(j.at("rpe_band"));
        const auto& t = j.at("tool");
        cfg.tool.present = t.at("present").get<bool>();
        cfg.tool.center_row = t.at("center_row").get<double>();
        cfg.tool.center_col = t.at("center_col").get<double>();
        cfg.tool.length = t.at("length").get<double>();
        cfg.tool.thickness = t.at("thickness").get<double>();
        cfg.tool.angle_deg = t.at("angle_deg").get<double>();
        cfg.tool.shadow = t.value("shadow", true);
        const auto& r = j.at("regions");
        cfg.background = {core::ClassId::Background, params_from_json(r.at("background"))};
        cfg.ilm = {core::ClassId::ILM, params_from_json(r.at("ilm"))};
        cfg.rpe = {core::ClassId::RPE, params_from_json(r.at("rpe"))};
        cfg.tool_region = {core::ClassId::Tool, params_from_json(r.at("tool"))};
        cfg.geometry_jitter = j.value("geometry_jitter", 0.0);
    } catch (const nlohmann::json::exception& e) {
        fail("InvalidConfig", std::string("bad phantom config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

} // namespace specstat::phantom
