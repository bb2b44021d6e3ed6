#include "specstat/weaklabel/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "specstat/error.hpp"
#include "specstat/rng.hpp"

namespace specstat::weaklabel {

PatchDataset build_dataset(const std::vector<core::ParameterMap>& maps,
                           const std::vector<core::LabelMap>& gt, int patch_size) {
    require(!maps.empty(), "InvalidParams", "need at least one parameter map");
    const int rows = maps[0].rows;
    const int cols = maps[0].cols;
    for (const auto& m : maps)
        require(m.rows == rows && m.cols == cols, "DimensionMismatch",
                "parameter maps disagree on grid dimensions");
    for (const auto& g : gt)
        require(g.height >= rows * patch_size && g.width >= cols * patch_size,
                "DimensionMismatch", "ground-truth maps smaller than the patch grid");

    PatchDataset data;
    for (const auto& m : maps)
        data.feature_names.push_back(m.family + "." + m.param_name);

    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            bool all_valid = true;
            for (const auto& m : maps)
                all_valid = all_valid && m.is_valid(r, c);
            if (!all_valid)
                continue;

            std::array<std::size_t, core::kNumClasses> counts{};
            for (int y = r * patch_size; y < (r + 1) * patch_size; ++y) {
                for (int x = c * patch_size; x < (c + 1) * patch_size; ++x) {
                    bool foreground = false;
                    for (const auto& g : gt) {
                        if (g.at(y, x)) {
                            ++counts[static_cast<int>(g.cls)];
                            foreground = true;
                        }
                    }
                    if (!foreground)
                        ++counts[static_cast<int>(core::ClassId::Background)];
                }
            }
            // plurality label; exact ties go to Background
            std::size_t best = 0;
            bool tie = false;
            int best_cls = static_cast<int>(core::ClassId::Background);
            for (int k = 0; k < core::kNumClasses; ++k) {
                if (counts[k] > best) {
                    best = counts[k];
                    best_cls = k;
                    tie = false;
                } else if (counts[k] == best && counts[k] > 0 && k != best_cls) {
                    tie = true;
                }
            }
            core::ClassId label = tie ? core::ClassId::Background
                                      : static_cast<core::ClassId>(best_cls);

            std::vector<double> row_features(maps.size());
            for (std::size_t m = 0; m < maps.size(); ++m)
                row_features[m] = maps[m].at(r, c);
            data.features.push_back(std::move(row_features));
            data.labels.push_back(label);
            data.cells.emplace_back(r, c);
        }
    }
    require(!data.features.empty(), "EmptyInput", "no valid patches in the parameter maps");
    return data;
}

double gini(const std::array<std::size_t, core::kNumClasses>& label_counts) {
    std::size_t total = 0;
    for (auto c : label_counts)
        total += c;
    require(total > 0, "EmptyInput", "gini of an empty node is undefined");
    double sum_sq = 0.0;
    for (auto c : label_counts) {
        double frac = static_cast<double>(c) / static_cast<double>(total);
        sum_sq += frac * frac;
    }
    return 1.0 - sum_sq;
}

namespace {

struct TreeBuilder {
    const PatchDataset& data;
    const ForestHyper& hyper;
    int mtry;
    Rng rng;
    Tree tree;

    TreeBuilder(const PatchDataset& d, const ForestHyper& h, std::uint64_t seed)
        : data(d), hyper(h), rng(seed) {
        const int dim = static_cast<int>(d.dim());
        mtry = h.features_per_split > 0
                   ? std::min(h.features_per_split, dim)
                   : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(dim))));
    }

    static std::array<std::size_t, core::kNumClasses> count_labels(
        const PatchDataset& data, const std::vector<std::size_t>& idx) {
        std::array<std::size_t, core::kNumClasses> counts{};
        for (auto i : idx)
            ++counts[static_cast<int>(data.labels[i])];
        return counts;
    }

    int make_leaf(const std::array<std::size_t, core::kNumClasses>& counts, std::size_t n) {
        TreeNode node;
        for (int k = 0; k < core::kNumClasses; ++k)
            node.probs[k] = static_cast<double>(counts[k]) / static_cast<double>(n);
        tree.nodes.push_back(node);
        return static_cast<int>(tree.nodes.size()) - 1;
    }

    // partial Fisher-Yates for a subset of feature indices
    std::vector<int> sample_features() {
        const int dim = static_cast<int>(data.dim());
        std::vector<int> all(dim);
        std::iota(all.begin(), all.end(), 0);
        for (int i = 0; i < mtry; ++i) {
            int j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(dim - i)));
            std::swap(all[i], all[j]);
        }
        all.resize(mtry);
        return all;
    }

    int grow(std::vector<std::size_t>& idx, int depth) {
        const std::size_t n = idx.size();
        auto counts = count_labels(data, idx);
        const double node_gini = gini(counts);
        if (depth >= hyper.max_depth || node_gini == 0.0 ||
            n < 2 * static_cast<std::size_t>(hyper.min_leaf))
            return make_leaf(counts, n);

        // greedy best split over a random feature subset; decisions depend only
        // on sample order and counts so monotone feature transforms preserve
        // the tree structure
        auto candidates = sample_features();
        int best_feature = -1;
        std::size_t best_pos = 0;
        double best_impurity = std::numeric_limits<double>::infinity();
        std::vector<std::size_t> order(idx);
        std::vector<std::size_t> best_order;

        for (int f : candidates) {
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                double va = data.features[a][f], vb = data.features[b][f];
                return va < vb || (va == vb && a < b);
            });
            std::array<std::size_t, core::kNumClasses> left{};
            auto right = counts;
            for (std::size_t pos = 1; pos < n; ++pos) {
                const int moved = static_cast<int>(data.labels[order[pos - 1]]);
                ++left[moved];
                --right[moved];
                if (pos < static_cast<std::size_t>(hyper.min_leaf) ||
                    n - pos < static_cast<std::size_t>(hyper.min_leaf))
                    continue;
                // splits only between distinct observed values
                if (data.features[order[pos - 1]][f] == data.features[order[pos]][f])
                    continue;
                double gl = gini(left), gr = gini(right);
                double weighted = (static_cast<double>(pos) * gl +
                                   static_cast<double>(n - pos) * gr) /
                                  static_cast<double>(n);
                if (weighted < best_impurity) {
                    best_impurity = weighted;
                    best_feature = f;
                    best_pos = pos;
                    best_order = order;
                }
            }
        }

        if (best_feature < 0 || best_impurity >= node_gini)
            return make_leaf(counts, n);

        const double lo = data.features[best_order[best_pos - 1]][best_feature];
        const double hi = data.features[best_order[best_pos]][best_feature];
        TreeNode node;
        node.feature = best_feature;
        node.threshold = lo + 0.5 * (hi - lo);
        const int self = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back(node);

        std::vector<std::size_t> left_idx(best_order.begin(),
                                          best_order.begin() + static_cast<std::ptrdiff_t>(best_pos));
        std::vector<std::size_t> right_idx(best_order.begin() + static_cast<std::ptrdiff_t>(best_pos),
                                           best_order.end());
        tree.nodes[self].left = grow(left_idx, depth + 1);
        tree.nodes[self].right = grow(right_idx, depth + 1);
        return self;
    }
};

std::array<double, core::kNumClasses> tree_probs(const Tree& tree,
                                                 const std::vector<double>& features) {
    int node = 0;
    while (!tree.nodes[node].is_leaf())
        node = features[tree.nodes[node].feature] < tree.nodes[node].threshold
                   ? tree.nodes[node].left
                   : tree.nodes[node].right;
    return tree.nodes[node].probs;
}

core::ClassId argmax_class(const std::array<double, core::kNumClasses>& probs) {
    int best = 0;
    for (int k = 1; k < core::kNumClasses; ++k)
        if (probs[k] > probs[best]) // ties keep the lower class index
            best = k;
    return static_cast<core::ClassId>(best);
}

} // namespace

Forest train_forest(const PatchDataset& data, const ForestHyper& hyper, std::uint64_t seed,
                    Exec exec) {
    require(data.size() >= 50, "InvalidParams", "forest training needs at least 50 rows");
    std::array<std::size_t, core::kNumClasses> counts{};
    for (auto l : data.labels)
        ++counts[static_cast<int>(l)];
    int present = 0;
    for (auto c : counts)
        present += c > 0;
    require(present >= 2, "DegenerateDataset", "forest training needs at least 2 classes");

    Forest forest;
    forest.hyper = hyper;
    forest.train_seed = seed;
    forest.feature_names = data.feature_names;
    forest.trees.resize(static_cast<std::size_t>(hyper.n_trees));

    const std::size_t n = data.size();
    std::vector<std::vector<std::uint8_t>> in_bag(forest.trees.size(),
                                                  std::vector<std::uint8_t>(n, 0));

    parallel_for_dynamic(
        hyper.n_trees,
        [&](std::int64_t t) {
            TreeBuilder builder(data, hyper, seed + static_cast<std::uint64_t>(t));
            std::vector<std::size_t> idx;
            idx.reserve(n);
            if (hyper.bootstrap) {
                for (std::size_t i = 0; i < n; ++i) {
                    auto pick = static_cast<std::size_t>(builder.rng.below(n));
                    idx.push_back(pick);
                    in_bag[static_cast<std::size_t>(t)][pick] = 1;
                }
            } else {
                idx.resize(n);
                std::iota(idx.begin(), idx.end(), 0);
                std::fill(in_bag[static_cast<std::size_t>(t)].begin(),
                          in_bag[static_cast<std::size_t>(t)].end(), 1);
            }
            builder.grow(idx, 0);
            forest.trees[static_cast<std::size_t>(t)] = std::move(builder.tree);
        },
        exec);

    // out-of-bag accuracy: average the leaf distributions of the trees that
    // did not see the row
    std::size_t scored = 0, correct = 0;
    for (std::size_t i = 0; i < n; ++i) {
        std::array<double, core::kNumClasses> probs{};
        int voters = 0;
        for (std::size_t t = 0; t < forest.trees.size(); ++t) {
            if (in_bag[t][i])
                continue;
            auto p = tree_probs(forest.trees[t], data.features[i]);
            for (int k = 0; k < core::kNumClasses; ++k)
                probs[k] += p[k];
            ++voters;
        }
        if (voters == 0)
            continue;
        for (auto& p : probs)
            p /= voters;
        ++scored;
        correct += argmax_class(probs) == data.labels[i];
    }
    forest.oob_accuracy = scored > 0 ? static_cast<double>(correct) / static_cast<double>(scored)
                                     : 0.0;
    return forest;
}

Prediction predict(const Forest& forest, const std::vector<double>& features) {
    require(features.size() == forest.n_features(), "DimensionMismatch",
            "feature vector length does not match the trained forest");
    Prediction pred;
    for (const auto& tree : forest.trees) {
        auto p = tree_probs(tree, features);
        for (int k = 0; k < core::kNumClasses; ++k)
            pred.probs[k] += p[k];
    }
    for (auto& p : pred.probs)
        p /= static_cast<double>(forest.trees.size());
    pred.cls = argmax_class(pred.probs);
    return pred;
}

std::vector<core::LabelMap> weak_maps(const Forest& forest,
                                      const std::vector<core::ParameterMap>& maps,
                                      int scan_height, int scan_width, int patch_size,
                                      Exec exec) {
    require(!maps.empty(), "InvalidParams", "need at least one parameter map");
    require(maps.size() == forest.n_features(), "DimensionMismatch",
            "parameter map count does not match the trained forest");
    const int rows = maps[0].rows;
    const int cols = maps[0].cols;
    for (const auto& m : maps)
        require(m.rows == rows && m.cols == cols, "DimensionMismatch",
                "parameter maps disagree on grid dimensions");

    std::vector<core::ClassId> patch_class(static_cast<std::size_t>(rows) * cols,
                                           core::ClassId::Background);
    parallel_for_dynamic(
        static_cast<std::int64_t>(patch_class.size()),
        [&](std::int64_t idx) {
            const int r = static_cast<int>(idx) / cols;
            const int c = static_cast<int>(idx) % cols;
            for (const auto& m : maps)
                if (!m.is_valid(r, c))
                    return; // invalid patches stay Background
            std::vector<double> features(maps.size());
            for (std::size_t m = 0; m < maps.size(); ++m)
                features[m] = maps[m].at(r, c);
            patch_class[static_cast<std::size_t>(idx)] = predict(forest, features).cls;
        },
        exec);

    std::vector<core::LabelMap> out;
    for (auto fg : core::kForegroundClasses) {
        core::LabelMap map = core::LabelMap::empty(fg, scan_height, scan_width);
        for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < cols; ++c) {
                if (patch_class[static_cast<std::size_t>(r) * cols + c] != fg)
                    continue;
                for (int y = r * patch_size; y < std::min((r + 1) * patch_size, scan_height); ++y)
                    for (int x = c * patch_size; x < std::min((c + 1) * patch_size, scan_width); ++x)
                        map.set(y, x, true);
            }
        }
        out.push_back(std::move(map));
    }
    return out;
}

namespace {

nlohmann::json node_to_json(const Tree& tree, int index) {
    const TreeNode& node = tree.nodes[static_cast<std::size_t>(index)];
    if (node.is_leaf()) {
        return {{"leaf", std::vector<double>(node.probs.begin(), node.probs.end())}};
    }
    return {{"feature", node.feature},
            {"threshold", node.threshold},
            {"left", node_to_json(tree, node.left)},
            {"right", node_to_json(tree, node.right)}};
}

int node_from_json(const nlohmann::json& j, Tree& tree) {
    TreeNode node;
    const int self = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(node);
    if (j.contains("leaf")) {
        auto probs = j.at("leaf").get<std::vector<double>>();
        require(probs.size() == core::kNumClasses, "InvalidConfig", "leaf must hold 4 probabilities");
        std::copy(probs.begin(), probs.end(), tree.nodes[self].probs.begin());
        return self;
    }
    tree.nodes[self].feature = j.at("feature").get<int>();
    tree.nodes[self].threshold = j.at("threshold").get<double>();
    tree.nodes[self].left = node_from_json(j.at("left"), tree);
    tree.nodes[self].right = node_from_json(j.at("right"), tree);
    return self;
}

} // namespace

nlohmann::json to_json(const Forest& forest) {
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& tree : forest.trees)
        trees.push_back(node_to_json(tree, 0));
    return {{"hyper",
             {{"n_trees", forest.hyper.n_trees},
              {"max_depth", forest.hyper.max_depth},
              {"min_leaf", forest.hyper.min_leaf},
              {"features_per_split", forest.hyper.features_per_split},
              {"bootstrap", forest.hyper.bootstrap}}},
            {"train_seed", forest.train_seed},
            {"feature_names", forest.feature_names},
            {"oob_accuracy", forest.oob_accuracy},
            {"trees", trees}};
}

Forest forest_from_json(const nlohmann::json& j) {
    Forest forest;
    try {
        const auto& h = j.at("hyper");
        forest.hyper.n_trees = h.at("n_trees").get<int>();
        forest.hyper.max_depth = h.at("max_depth").get<int>();
        forest.hyper.min_leaf = h.at("min_leaf").get<int>();
        forest.hyper.features_per_split = h.at("features_per_split").get<int>();
        forest.hyper.bootstrap = h.at("bootstrap").get<bool>();
        forest.train_seed = j.at("train_seed").get<std::uint64_t>();
        forest.feature_names = j.at("feature_names").get<std::vector<std::string>>();
        forest.oob_accuracy = j.value("oob_accuracy", 0.0);
        for (const auto& t : j.at("trees")) {
            Tree tree;
            node_from_json(t, tree);
            forest.trees.push_back(std::move(tree));
        }
    } catch (const nlohmann::json::exception& e) {
        fail("InvalidConfig", std::string("bad forest file: ") + e.what());
    }
    return forest;
}

} // namespace specstat::weaklabel
