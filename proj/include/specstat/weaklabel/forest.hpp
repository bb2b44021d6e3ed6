#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "specstat/core/types.hpp"
#include "specstat/parallel.hpp"

namespace specstat::weaklabel {

// One row per valid patch: the fitted parameter vector and the majority-vote
// class of the patch's ground-truth pixels.
struct PatchDataset {
    std::vector<std::vector<double>> features;
    std::vector<core::ClassId> labels;
    std::vector<std::string> feature_names;
    std::vector<std::pair<int, int>> cells; // (row, col) in the patch grid

    std::size_t size() const { return features.size(); }
    std::size_t dim() const { return feature_names.size(); }
};

// Majority vote over the patch's pixels; exact ties go to Background.
PatchDataset build_dataset(const std::vector<core::ParameterMap>& maps,
                           const std::vector<core::LabelMap>& gt, int patch_size);

// Gini impurity 1 - sum (n_c/n)^2.
double gini(const std::array<std::size_t, core::kNumClasses>& label_counts);

struct ForestHyper {
    int n_trees = 50;
    int max_depth = 12;
    int min_leaf = 5;
    int features_per_split = 0; // 0 = ceil(sqrt(d))
    bool bootstrap = true;
};

// Axis-aligned threshold nodes; feature < 0 marks a leaf. Thresholds sit
// strictly between two observed values (midpoints), so prediction is invariant
// to monotone feature transforms applied at train and predict time alike.
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    std::array<double, core::kNumClasses> probs{};

    bool is_leaf() const { return feature < 0; }
};

struct Tree {
    std::vector<TreeNode> nodes; // nodes[0] is the root
};

struct Forest {
    ForestHyper hyper;
    std::uint64_t train_seed = 0;
    std::vector<std::string> feature_names;
    std::vector<Tree> trees;
    double oob_accuracy = 0.0;

    std::size_t n_features() const { return feature_names.size(); }
};

// Bootstrap + greedy best-Gini splits over a random feature subset per node.
// Per-tree seeds are seed + tree_index, so trees can grow in parallel with a
// deterministic result.
Forest train_forest(const PatchDataset& data, const ForestHyper& hyper, std::uint64_t seed,
                    Exec exec = Exec::Parallel);

struct Prediction {
    core::ClassId cls = core::ClassId::Background;
    std::array<double, core::kNumClasses> probs{};
};

// Mean of leaf distributions across trees; argmax ties break by class order
// Background < ILM < RPE < Tool.
Prediction predict(const Forest& forest, const std::vector<double>& features);

// Classifies every valid patch and paints its patch_size x patch_size block;
// invalid patches and discarded margins stay Background. One binary map per
// non-background class (ILM, RPE, Tool).
std::vector<core::LabelMap> weak_maps(const Forest& forest,
                                      const std::vector<core::ParameterMap>& maps,
                                      int scan_height, int scan_width, int patch_size,
                                      Exec exec = Exec::Parallel);

nlohmann::json to_json(const Forest& forest);
Forest forest_from_json(const nlohmann::json& j);

} // namespace specstat::weaklabel
