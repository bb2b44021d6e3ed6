#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "specstat/dist/dist.hpp"
#include "specstat/dist/special.hpp"
#include "specstat/rng.hpp"
#include "specstat/stats/stats.hpp"

using namespace specstat;

namespace {

stats::CdfFn uniform01_cdf() {
    return [](double x) { return std::clamp(x, 0.0, 1.0); };
}

} // namespace

TEST_SUITE("stats") {

TEST_CASE("ks_statistic: hand-enumerated EDF oracles") {
    // {0.1, 0.4, 0.7} vs U(0,1): gaps 1/3-0.1, 2/3-0.4, 1-0.7 -> D = 0.3
    CHECK(stats::ks_statistic({0.1, 0.4, 0.7}, uniform01_cdf()) ==
          doctest::Approx(0.3).epsilon(1e-15));

    // samples at the (i - 0.5)/n quantiles leave symmetric half-gaps: D = 0.5/n
    for (int n : {4, 10, 37}) {
        std::vector<double> xs(n);
        for (int i = 0; i < n; ++i)
            xs[static_cast<std::size_t>(i)] = (i + 0.5) / n;
        CHECK(stats::ks_statistic(xs, uniform01_cdf()) ==
              doctest::Approx(0.5 / n).epsilon(1e-12));
    }

    // against its own EDF interpolant D is bounded by 1/n
    Rng rng(5);
    std::vector<double> xs(50);
    for (auto& x : xs)
        x = rng.uniform01();
    auto sorted = xs;
    std::sort(sorted.begin(), sorted.end());
    auto edf_interp = [&sorted](double x) {
        const auto it = std::upper_bound(sorted.begin(), sorted.end(), x);
        return static_cast<double>(it - sorted.begin()) / static_cast<double>(sorted.size());
    };
    CHECK(stats::ks_statistic(xs, edf_interp) <= 1.0 / 50 + 1e-12);

    // agrees with the independent enumeration oracle on random data
    const double ours = stats::ks_statistic(xs, uniform01_cdf());
    CHECK(ours == doctest::Approx(oracle::ks_d(xs, uniform01_cdf())).epsilon(1e-14));

    CHECK_THROWS_AS(stats::ks_statistic({1.0}, uniform01_cdf()), Error);
}

TEST_CASE("ks_pvalue: degenerate ends and the Monte Carlo null") {
    CHECK(stats::ks_pvalue(0.0, 100) == 1.0);
    CHECK(stats::ks_pvalue(1.0, 1000) <= 1e-12);

    // Monte Carlo null oracle with an independent generator (mt19937_64):
    // p(D >= d) for size-100 uniform samples
    std::mt19937_64 gen(20240601);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const int reps = 100000;
    int exceed03 = 0, exceed01 = 0;
    for (int r = 0; r < reps; ++r) {
        std::vector<double> xs(100);
        for (auto& x : xs)
            x = unif(gen);
        const double d = oracle::ks_d(xs, uniform01_cdf());
        exceed03 += d >= 0.3;
        exceed01 += d >= 0.1;
    }
    const double mc03 = static_cast<double>(exceed03) / reps;
    const double mc01 = static_cast<double>(exceed01) / reps;
    CHECK(std::fabs(stats::ks_pvalue(0.3, 100) - mc03) <= 2e-3);
    CHECK(std::fabs(stats::ks_pvalue(0.1, 100) - mc01) <= 5e-3);
}

TEST_CASE("cvm_statistic: hand-computed value and lower bound") {
    // 1/36 + (1/6-0.1)^2 + (1/2-0.4)^2 + (5/6-0.7)^2 = 0.06
    const double w = stats::cvm_statistic({0.1, 0.4, 0.7}, uniform01_cdf());
    CHECK(std::fabs(w - 0.06) <= 1e-12);

    // samples at the plotting positions attain exactly the 1/(12N) bound
    for (int n : {3, 8, 21}) {
        std::vector<double> xs(n);
        for (int i = 0; i < n; ++i)
            xs[static_cast<std::size_t>(i)] = (2.0 * (i + 1.0) - 1.0) / (2.0 * n);
        CHECK(stats::cvm_statistic(xs, uniform01_cdf()) ==
              doctest::Approx(1.0 / (12.0 * n)).epsilon(1e-13));
    }

    // W >= 1/(12N) exactly, on random samples
    Rng rng(17);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> xs(20);
        for (auto& x : xs)
            x = rng.uniform01();
        CHECK(stats::cvm_statistic(xs, uniform01_cdf()) >= 1.0 / (12.0 * 20));
    }

    // moving one sample away from its plotting position cannot decrease W
    std::vector<double> at_pos = {1.0 / 6, 3.0 / 6, 5.0 / 6};
    const double base = stats::cvm_statistic(at_pos, uniform01_cdf());
    for (double shift : {0.05, 0.1, 0.14}) {
        auto moved = at_pos;
        moved[2] += shift;
        CHECK(stats::cvm_statistic(moved, uniform01_cdf()) >= base);
    }
}

TEST_CASE("cvm_pvalue: edges plus the independent Monte Carlo oracle") {
    // minimal attainable W has p near 1
    CHECK(stats::cvm_pvalue(1.0 / 36.0, 3, 7) >= 0.99);
    // W beyond every simulation
    CHECK(stats::cvm_pvalue(10.0, 3, 7) == doctest::Approx(1.0 / 2001.0));

    // independent 1e5-replicate Monte Carlo with std::mt19937_64
    std::mt19937_64 gen(55);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const int reps = 100000;
    int exceed = 0;
    for (int r = 0; r < reps; ++r) {
        std::vector<double> u(3);
        for (auto& v : u)
            v = unif(gen);
        std::sort(u.begin(), u.end());
        exceed += oracle::cvm_w_sorted_uniform(u) >= 0.06;
    }
    const double big_mc = static_cast<double>(exceed) / reps;
    CHECK(std::fabs(stats::cvm_pvalue(0.06, 3, 99) - big_mc) <= 0.03);

    // deterministic for a fixed seed, any execution policy
    CHECK(stats::cvm_pvalue(0.06, 3, 99, Exec::Serial) == stats::cvm_pvalue(0.06, 3, 99));
}

TEST_CASE("anova_f: hand-computed F and edge cases") {
    auto r = stats::anova_f({{1, 2, 3}, {4, 5, 6}});
    CHECK(std::fabs(r.statistic - 13.5) <= 1e-9);
    CHECK(r.df_between == 1);
    CHECK(r.df_within == 4);

    // p from an independent quadrature of the F(1,4) density
    auto f_pdf = [](double x) {
        // d1=1, d2=4
        const double d1 = 1.0, d2 = 4.0;
        const double num = std::pow(d1 * x, d1 / 2) * std::pow(d2, d2 / 2) /
                           std::pow(d1 * x + d2, (d1 + d2) / 2);
        const double beta = std::exp(dist::log_gamma(d1 / 2) + dist::log_gamma(d2 / 2) -
                                     dist::log_gamma((d1 + d2) / 2));
        return num / (x * beta);
    };
    const double tail = oracle::adaptive_simpson(f_pdf, 13.5, 4000.0, 1e-10);
    CHECK(r.p_value == doctest::Approx(tail).epsilon(1e-7));

    auto same = stats::anova_f({{1, 2, 3}, {1, 2, 3}});
    CHECK(same.statistic == 0.0);
    CHECK(same.p_value == 1.0);

    auto degenerate = stats::anova_f({{1, 1}, {2, 2}});
    CHECK(std::isinf(degenerate.statistic));
    CHECK(degenerate.p_value == 0.0);

    CHECK_THROWS_AS(stats::anova_f({{1.0}, {2.0, 3.0}}), Error);
}

TEST_CASE("anova_f agrees with a permutation oracle at moderate n") {
    // parametric and permutation p-values converge for normal-ish groups
    std::mt19937_64 gen(99);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<double> a(40), b(40);
    for (auto& x : a)
        x = noise(gen);
    for (auto& x : b)
        x = 0.55 + noise(gen);
    auto r = stats::anova_f({a, b});

    std::vector<double> pooled = a;
    pooled.insert(pooled.end(), b.begin(), b.end());
    int exceed = 0;
    const int reps = 20000;
    for (int rep = 0; rep < reps; ++rep) {
        std::shuffle(pooled.begin(), pooled.end(), gen);
        std::vector<double> pa(pooled.begin(), pooled.begin() + 40);
        std::vector<double> pb(pooled.begin() + 40, pooled.end());
        exceed += stats::anova_f({pa, pb}).statistic >= r.statistic;
    }
    const double p_perm = static_cast<double>(exceed) / reps;
    CHECK(std::fabs(r.p_value - p_perm) <= 0.01);
}

TEST_CASE("anova invariances: shift and scale") {
    std::vector<std::vector<double>> groups = {{1.2, 3.1, 2.2, 4.4}, {2.0, 5.5, 3.3}};
    const double f0 = stats::anova_f(groups).statistic;
    for (auto& g : groups)
        for (auto& x : g)
            x = 7.25 + x;
    CHECK(stats::anova_f(groups).statistic == doctest::Approx(f0).epsilon(1e-12));
    for (auto& g : groups)
        for (auto& x : g)
            x *= 3.5;
    CHECK(stats::anova_f(groups).statistic == doctest::Approx(f0).epsilon(1e-12));
}

TEST_CASE("levene: hand-computed W, trimming, and edge cases") {
    // Z-means 2/3 and 4/3, numerator 2/3, denominator 10/3, scale 4 -> W = 0.8
    auto r = stats::levene({{1, 2, 3}, {2, 4, 6}}, 0.0);
    CHECK(std::fabs(r.statistic - 0.8) <= 1e-9);
    CHECK(r.df_between == 1);
    CHECK(r.df_within == 4);

    // identical dispersion patterns make every group Z-mean equal -> W = 0
    auto zero = stats::levene({{1, 2, 3}, {11, 12, 13}}, 0.0);
    CHECK(zero.statistic == 0.0);
    CHECK(zero.p_value == 1.0);

    // trim floor(0.05 * 60) = 3 from each tail
    std::vector<double> g(60);
    for (int i = 0; i < 60; ++i)
        g[static_cast<std::size_t>(i)] = i;
    auto outliered = g;
    outliered[0] = -1e6; // lands inside the trimmed tail
    auto r1 = stats::levene({g, g}, 0.05);
    auto r2 = stats::levene({outliered, g}, 0.05);
    // the outlier must be trimmed away: identical W
    CHECK(r1.statistic == doctest::Approx(r2.statistic).epsilon(1e-12));

    CHECK_THROWS_AS(stats::levene({{1, 2}, {3, 4, 5}}, 0.0), Error);
}

TEST_CASE("gof_report: family ordering and variance semantics") {
    // per-scan Gamma pixels: the true family must outscore Rayleigh in mean p
    stats::GroupSamples group;
    group.cls = core::ClassId::RPE;
    for (std::uint64_t scan = 0; scan < 4; ++scan)
        group.per_scan.push_back(dist::sample(dist::DistParams::gamma(20, 7), 100 + scan, 3000));

    auto report = stats::gof_report({group}, {dist::Family::Gamma, dist::Family::Rayleigh}, 1);
    REQUIRE(report.entries.size() == 2);
    const auto& gamma_entry = report.entries[0];
    const auto& rayleigh_entry = report.entries[1];
    CHECK(gamma_entry.ks.p_mean > rayleigh_entry.ks.p_mean);
    CHECK(gamma_entry.cvm.p_mean > rayleigh_entry.cvm.p_mean);
    CHECK(gamma_entry.n_scans == 4);

    // a single scan reports zero variance
    stats::GroupSamples single;
    single.cls = core::ClassId::ILM;
    single.per_scan.push_back(dist::sample(dist::DistParams::gamma(7, 9), 5, 2000));
    auto single_report = stats::gof_report({single}, {dist::Family::Gamma}, 2);
    CHECK(single_report.entries[0].ks.stat_var == 0.0);
    CHECK(single_report.entries[0].cvm.p_var == 0.0);

    // two identical scans give zero variance across scans
    stats::GroupSamples twin;
    twin.cls = core::ClassId::ILM;
    auto xs = dist::sample(dist::DistParams::gamma(7, 9), 6, 2000);
    twin.per_scan.push_back(xs);
    twin.per_scan.push_back(xs);
    auto twin_report = stats::gof_report({twin}, {dist::Family::Gamma}, 3);
    CHECK(twin_report.entries[0].ks.stat_var == doctest::Approx(0.0).epsilon(1e-18));
    CHECK(twin_report.entries[0].n_scans == 2);
}

TEST_CASE("gof_report and var_report serialize with the documented fields") {
    stats::GroupSamples group;
    group.cls = core::ClassId::ILM;
    group.per_scan.push_back(dist::sample(dist::DistParams::gamma(7, 9), 1, 500));
    group.per_scan.push_back(dist::sample(dist::DistParams::gamma(7, 9), 2, 500));

    auto gof = stats::to_json(stats::gof_report({group}, {dist::Family::Gamma}, 1));
    const auto& entry = gof.at("entries").at(0);
    for (const char* key : {"stat_mean", "stat_var", "p_mean", "p_var", "n_scans"}) {
        CHECK(entry.at("ks").contains(key));
        CHECK(entry.at("cvm").contains(key));
    }

    auto var = stats::to_json(stats::var_report({group, group}));
    CHECK(var.contains("levene"));
    CHECK(var.contains("anova"));
    CHECK(var.at("anova").at(0).contains("p_value"));
}

TEST_CASE("f_survival oracle: regularized incomplete beta route vs quadrature") {
    for (auto [f, d1, d2] : {std::tuple{1.3, 4.0, 17.0}, {2.7, 2.0, 9.0}, {0.4, 6.0, 3.0}}) {
        auto pdf = [d1 = d1, d2 = d2](double x) {
            const double num = std::pow(d1 * x, d1 / 2) * std::pow(d2, d2 / 2) /
                               std::pow(d1 * x + d2, (d1 + d2) / 2);
            const double beta = std::exp(dist::log_gamma(d1 / 2) + dist::log_gamma(d2 / 2) -
                                         dist::log_gamma((d1 + d2) / 2));
            return num / (x * beta);
        };
        const double tail = oracle::adaptive_simpson(pdf, f, 10000.0, 1e-11);
        CHECK(dist::f_survival(f, d1, d2) == doctest::Approx(tail).epsilon(1e-6));
    }
}

} // TEST_SUITE
