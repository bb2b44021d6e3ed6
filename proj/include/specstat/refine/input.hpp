#pragma once

#include <string>
#include <vector>

#include "specstat/core/types.hpp"
#include "specstat/refine/tensor.hpp"

namespace specstat::refine {

// The four network input configurations:
//   A: [scan]                      1 channel, raw B-scan baseline
//   B: [weak ILM, weak RPE, weak Tool]  3 channels
//   C: [scan, k-map, theta-map]    3 channels
//   D: [k-map, theta-map]          2 channels, no raw intensities at all
enum class InputConfig { A, B, C, D };

std::string to_string(InputConfig c);
InputConfig input_config_from_string(const std::string& s);
int channel_count(InputConfig c);

// Optional sources for one scan; assemble_input picks what the config needs
// and errors with MissingSource otherwise. Parameter maps are upsampled to
// pixel resolution by patch replication.
struct InputSources {
    const core::BScan* scan = nullptr;
    const core::ParameterMap* k_map = nullptr;
    const core::ParameterMap* theta_map = nullptr;
    const std::vector<core::LabelMap>* weak = nullptr; // ILM, RPE, Tool
    int patch_size = 7;
};

// Raw (un-normalized) channel stack at pixel resolution. Normalization happens
// at the train/infer boundary with statistics stored in the model file.
Tensor<float> assemble_input(InputConfig config, const InputSources& sources, int height,
                             int width);

// 3-channel 0/1 target tensor from ILM/RPE/Tool masks.
Tensor<float> targets_from_maps(const std::vector<core::LabelMap>& maps);

} // namespace specstat::refine
