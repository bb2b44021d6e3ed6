#include <doctest.h>

#include <cmath>

#include "specstat/rng.hpp"
#include "specstat/weaklabel/forest.hpp"

using namespace specstat;
using weaklabel::ForestHyper;

namespace {

// three separable Gamma-shape clusters plus a background cluster, 2-D features
weaklabel::PatchDataset cluster_dataset(std::size_t per_class, std::uint64_t seed) {
    weaklabel::PatchDataset data;
    data.feature_names = {"gamma.k", "gamma.theta"};
    Rng rng(seed);
    struct Cluster {
        core::ClassId cls;
        double k, theta;
    };
    const Cluster clusters[] = {{core::ClassId::Background, 3.0, 6.0},
                                {core::ClassId::ILM, 20.0, 9.0},
                                {core::ClassId::RPE, 45.0, 7.0},
                                {core::ClassId::Tool, 70.0, 5.0}};
    for (const auto& c : clusters) {
        for (std::size_t i = 0; i < per_class; ++i) {
            data.features.push_back({c.k + rng.normal(), c.theta + 0.5 * rng.normal()});
            data.labels.push_back(c.cls);
            data.cells.emplace_back(0, 0);
        }
    }
    return data;
}

core::ClassId nearest_centroid(const std::vector<double>& f) {
    const double ks[] = {3.0, 20.0, 45.0, 70.0};
    int best = 0;
    for (int i = 1; i < 4; ++i)
        if (std::fabs(f[0] - ks[i]) < std::fabs(f[0] - ks[best]))
            best = i;
    return static_cast<core::ClassId>(best);
}

} // namespace

TEST_SUITE("weaklabel") {

TEST_CASE("gini impurity closed cases") {
    CHECK(weaklabel::gini({10, 0, 0, 0}) == 0.0);
    CHECK(weaklabel::gini({5, 5, 0, 0}) == doctest::Approx(0.5));
    CHECK(weaklabel::gini({25, 25, 25, 25}) == doctest::Approx(0.75));
    CHECK_THROWS_AS(weaklabel::gini({0, 0, 0, 0}), Error);
}

TEST_CASE("build_dataset majority vote and tie rule") {
    // 7x7 grid of one patch; two parameter maps
    auto k_map = core::ParameterMap::make("gamma", "k", 1, 1);
    auto theta_map = core::ParameterMap::make("gamma", "theta", 1, 1);
    k_map.set(0, 0, 5.0);
    theta_map.set(0, 0, 2.0);

    auto rpe = core::LabelMap::empty(core::ClassId::RPE, 7, 7);
    auto ilm = core::LabelMap::empty(core::ClassId::ILM, 7, 7);

    SUBCASE("patch fully inside RPE") {
        std::fill(rpe.mask.begin(), rpe.mask.end(), 1);
        auto data = weaklabel::build_dataset({k_map, theta_map}, {ilm, rpe}, 7);
        REQUIRE(data.size() == 1);
        CHECK(data.labels[0] == core::ClassId::RPE);
        CHECK(data.features[0] == std::vector<double>{5.0, 2.0});
    }

    SUBCASE("25 ILM vs 24 background pixels gives ILM") {
        for (int i = 0; i < 25; ++i)
            ilm.mask[static_cast<std::size_t>(i)] = 1;
        auto data = weaklabel::build_dataset({k_map, theta_map}, {ilm, rpe}, 7);
        CHECK(data.labels[0] == core::ClassId::ILM);
    }

    SUBCASE("24/24 split with 1 background pixel ties to Background") {
        for (int i = 0; i < 24; ++i)
            ilm.mask[static_cast<std::size_t>(i)] = 1;
        for (int i = 24; i < 48; ++i)
            rpe.mask[static_cast<std::size_t>(i)] = 1;
        auto data = weaklabel::build_dataset({k_map, theta_map}, {ilm, rpe}, 7);
        CHECK(data.labels[0] == core::ClassId::Background);
    }

    SUBCASE("invalid patches are excluded") {
        k_map.set_invalid(0, 0);
        CHECK_THROWS_AS(weaklabel::build_dataset({k_map, theta_map}, {ilm, rpe}, 7), Error);
    }
}

TEST_CASE("train_forest: separable clusters reach 0.98 out-of-bag accuracy") {
    auto data = cluster_dataset(150, 2024);
    auto forest = weaklabel::train_forest(data, ForestHyper{}, 7);
    CHECK(forest.oob_accuracy >= 0.98);

    // the nearest-centroid oracle achieves the same on fresh points, and the
    // forest agrees with it
    Rng rng(555);
    int agree = 0;
    const int n_fresh = 400;
    for (int i = 0; i < n_fresh; ++i) {
        const double ks[] = {3.0, 20.0, 45.0, 70.0};
        const int cls = static_cast<int>(rng.below(4));
        std::vector<double> f = {ks[cls] + rng.normal(), 6.0 + 0.5 * rng.normal()};
        agree += weaklabel::predict(forest, f).cls == nearest_centroid(f);
    }
    CHECK(static_cast<double>(agree) / n_fresh >= 0.98);
}

TEST_CASE("train_forest rejects degenerate datasets") {
    weaklabel::PatchDataset single;
    single.feature_names = {"gamma.k"};
    for (int i = 0; i < 100; ++i) {
        single.features.push_back({static_cast<double>(i)});
        single.labels.push_back(core::ClassId::RPE);
        single.cells.emplace_back(0, 0);
    }
    CHECK_THROWS_AS(weaklabel::train_forest(single, ForestHyper{}, 1), Error);

    auto tiny = cluster_dataset(5, 3); // 20 rows < 50
    CHECK_THROWS_AS(weaklabel::train_forest(tiny, ForestHyper{}, 1), Error);
}

TEST_CASE("same seed gives byte-identical serialized forests") {
    auto data = cluster_dataset(60, 31);
    auto a = weaklabel::train_forest(data, ForestHyper{}, 17);
    auto b = weaklabel::train_forest(data, ForestHyper{}, 17);
    CHECK(weaklabel::to_json(a).dump() == weaklabel::to_json(b).dump());

    auto serial = weaklabel::train_forest(data, ForestHyper{}, 17, Exec::Serial);
    CHECK(weaklabel::to_json(a).dump() == weaklabel::to_json(serial).dump());

    auto c = weaklabel::train_forest(data, ForestHyper{}, 18);
    CHECK(weaklabel::to_json(a).dump() != weaklabel::to_json(c).dump());
}

TEST_CASE("forest JSON round trip preserves predictions") {
    auto data = cluster_dataset(60, 12);
    auto forest = weaklabel::train_forest(data, ForestHyper{}, 5);
    auto back = weaklabel::forest_from_json(weaklabel::to_json(forest));
    Rng rng(77);
    for (int i = 0; i < 100; ++i) {
        std::vector<double> f = {rng.uniform(0.0, 80.0), rng.uniform(3.0, 10.0)};
        auto p1 = weaklabel::predict(forest, f);
        auto p2 = weaklabel::predict(back, f);
        CHECK(p1.cls == p2.cls);
        CHECK(p1.probs == p2.probs);
    }
    CHECK(weaklabel::to_json(back).dump() == weaklabel::to_json(forest).dump());
}

TEST_CASE("predict: probabilities sum to one; ties break by class order") {
    auto data = cluster_dataset(60, 1);
    auto forest = weaklabel::train_forest(data, ForestHyper{}, 2);
    Rng rng(3);
    for (int i = 0; i < 50; ++i) {
        std::vector<double> f = {rng.uniform(0.0, 80.0), rng.uniform(3.0, 10.0)};
        auto p = weaklabel::predict(forest, f);
        double total = 0.0;
        for (double v : p.probs)
            total += v;
        CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    }
    CHECK_THROWS_AS(weaklabel::predict(forest, {1.0}), Error);

    // a handcrafted single-leaf forest predicts that leaf's class with p = 1
    weaklabel::Forest leaf_forest;
    leaf_forest.feature_names = {"gamma.k"};
    weaklabel::Tree tree;
    weaklabel::TreeNode leaf;
    leaf.probs = {0.0, 0.0, 1.0, 0.0};
    tree.nodes.push_back(leaf);
    leaf_forest.trees.push_back(tree);
    auto p = weaklabel::predict(leaf_forest, {42.0});
    CHECK(p.cls == core::ClassId::RPE);
    CHECK(p.probs[2] == 1.0);

    // exact tie between Background and ILM resolves to Background
    weaklabel::Forest tie_forest;
    tie_forest.feature_names = {"gamma.k"};
    weaklabel::TreeNode tie_leaf;
    tie_leaf.probs = {0.5, 0.5, 0.0, 0.0};
    weaklabel::Tree tie_tree;
    tie_tree.nodes.push_back(tie_leaf);
    tie_forest.trees.push_back(tie_tree);
    CHECK(weaklabel::predict(tie_forest, {1.0}).cls == core::ClassId::Background);
}

TEST_CASE("prediction is invariant to monotone feature transforms") {
    auto data = cluster_dataset(80, 88);
    auto transformed = data;
    for (auto& f : transformed.features)
        f[1] = std::log(f[1]); // strictly monotone on theta

    auto forest = weaklabel::train_forest(data, ForestHyper{}, 9);
    auto forest_t = weaklabel::train_forest(transformed, ForestHyper{}, 9);

    Rng rng(4);
    for (int i = 0; i < 300; ++i) {
        std::vector<double> f = {rng.uniform(0.0, 80.0), rng.uniform(3.0, 10.0)};
        std::vector<double> ft = {f[0], std::log(f[1])};
        CHECK(weaklabel::predict(forest, f).cls == weaklabel::predict(forest_t, ft).cls);
    }
}

TEST_CASE("weak_maps paints patch blocks and leaves margins empty") {
    auto data = cluster_dataset(60, 21);
    auto forest = weaklabel::train_forest(data, ForestHyper{}, 3);

    // 2x2 grid; cell (0,0) at the RPE cluster, others at background
    auto k_map = core::ParameterMap::make("gamma", "k", 2, 2);
    auto theta_map = core::ParameterMap::make("gamma", "theta", 2, 2);
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) {
            k_map.set(r, c, r == 0 && c == 0 ? 45.0 : 3.0);
            theta_map.set(r, c, 6.0);
        }

    auto maps = weaklabel::weak_maps(forest, {k_map, theta_map}, 16, 15, 7);
    REQUIRE(maps.size() == 3);
    const auto& rpe = maps[1];
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 15; ++x)
            CHECK(rpe.at(y, x) == (y < 7 && x < 7));

    // patch-constant: within any 7x7 block all values equal
    for (const auto& m : maps)
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 2; ++c) {
                const bool first = m.at(r * 7, c * 7);
                for (int y = r * 7; y < (r + 1) * 7; ++y)
                    for (int x = c * 7; x < (c + 1) * 7; ++x)
                        CHECK(m.at(y, x) == first);
            }

    SUBCASE("invalid patches become Background") {
        k_map.set_invalid(0, 0);
        auto maps2 = weaklabel::weak_maps(forest, {k_map, theta_map}, 16, 15, 7);
        CHECK(maps2[1].count() == 0);
    }

    SUBCASE("all-background predictions give three empty maps") {
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 2; ++c)
                k_map.set(r, c, 3.0);
        auto maps3 = weaklabel::weak_maps(forest, {k_map, theta_map}, 16, 15, 7);
        for (const auto& m : maps3)
            CHECK(m.count() == 0);
    }
}

} // TEST_SUITE
