#include "specstat/refine/input.hpp"

#include "specstat/fitgrid/fitgrid.hpp"

namespace specstat::refine {

std::string to_string(InputConfig c) {
    switch (c) {
    case InputConfig::A: return "A";
    case InputConfig::B: return "B";
    case InputConfig::C: return "C";
    case InputConfig::D: return "D";
    }
    fail("InvalidConfig", "unknown input config");
}

InputConfig input_config_from_string(const std::string& s) {
    if (s == "A" || s == "a") return InputConfig::A;
    if (s == "B" || s == "b") return InputConfig::B;
    if (s == "C" || s == "c") return InputConfig::C;
    if (s == "D" || s == "d") return InputConfig::D;
    fail("InvalidConfig", "input config must be one of A, B, C, D (got " + s + ")");
}

int channel_count(InputConfig c) {
    switch (c) {
    case InputConfig::A: return 1;
    case InputConfig::B: return 3;
    case InputConfig::C: return 3;
    case InputConfig::D: return 2;
    }
    fail("InvalidConfig", "unknown input config");
}

namespace {

void fill_scan_channel(Tensor<float>& t, int channel, const core::BScan& scan) {
    require(scan.height == t.h && scan.width == t.w, "DimensionMismatch",
            "scan does not match input dimensions");
    float* out = t.plane(channel);
    for (std::size_t i = 0; i < t.plane_size(); ++i)
        out[i] = static_cast<float>(scan.pixels[i]);
}

void fill_param_channel(Tensor<float>& t, int channel, const core::ParameterMap& map,
                        int patch_size) {
    auto pixels = fitgrid::upsample_to_pixels(map, t.h, t.w, patch_size);
    float* out = t.plane(channel);
    for (std::size_t i = 0; i < t.plane_size(); ++i)
        out[i] = static_cast<float>(pixels[i]);
}

void fill_mask_channel(Tensor<float>& t, int channel, const core::LabelMap& map) {
    require(map.height == t.h && map.width == t.w, "DimensionMismatch",
            "weak map does not match input dimensions");
    float* out = t.plane(channel);
    for (std::size_t i = 0; i < t.plane_size(); ++i)
        out[i] = map.mask[i] ? 1.0f : 0.0f;
}

} // namespace

Tensor<float> assemble_input(InputConfig config, const InputSources& sources, int height,
                             int width) {
    Tensor<float> t(channel_count(config), height, width);
    switch (config) {
    case InputConfig::A:
        require(sources.scan != nullptr, "MissingSource", "config A needs the B-scan");
        fill_scan_channel(t, 0, *sources.scan);
        break;
    case InputConfig::B:
        require(sources.weak != nullptr && sources.weak->size() == 3, "MissingSource",
                "config B needs the three weak maps");
        for (int c = 0; c < 3; ++c)
            fill_mask_channel(t, c, (*sources.weak)[static_cast<std::size_t>(c)]);
        break;
    case InputConfig::C:
        require(sources.scan != nullptr, "MissingSource", "config C needs the B-scan");
        require(sources.k_map != nullptr && sources.theta_map != nullptr, "MissingSource",
                "config C needs both Gamma parameter maps");
        fill_scan_channel(t, 0, *sources.scan);
        fill_param_channel(t, 1, *sources.k_map, sources.patch_size);
        fill_param_channel(t, 2, *sources.theta_map, sources.patch_size);
        break;
    case InputConfig::D:
        require(sources.k_map != nullptr && sources.theta_map != nullptr, "MissingSource",
                "config D needs both Gamma parameter maps");
        fill_param_channel(t, 0, *sources.k_map, sources.patch_size);
        fill_param_channel(t, 1, *sources.theta_map, sources.patch_size);
        break;
    }
    return t;
}

Tensor<float> targets_from_maps(const std::vector<core::LabelMap>& maps) {
    require(maps.size() == 3, "DimensionMismatch", "targets need the three class maps");
    Tensor<float> t(3, maps[0].height, maps[0].width);
    for (int c = 0; c < 3; ++c)
        fill_mask_channel(t, c, maps[static_cast<std::size_t>(c)]);
    return t;
}

} // namespace specstat::refine
