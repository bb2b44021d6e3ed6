#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include <json.hpp>

#include "specstat/core/types.hpp"
#include "specstat/dist/dist.hpp"
#include "specstat/parallel.hpp"

namespace specstat::stats {

// Pixel samples of one class, grouped by the B-scan they came from.
struct GroupSamples {
    core::ClassId cls = core::ClassId::Background;
    std::vector<std::vector<double>> per_scan;

    std::size_t total() const {
        std::size_t n = 0;
        for (const auto& s : per_scan)
            n += s.size();
        return n;
    }
};

struct GofResult {
    dist::Family family = dist::Family::Gamma;
    double statistic = 0.0; // KS D or CVM W
    double p_value = 0.0;
    std::size_t n = 0;
};

enum class VarTest { Anova, Levene };

struct VarResult {
    VarTest test = VarTest::Anova;
    double statistic = 0.0; // F or W
    double p_value = 0.0;
    std::size_t df_between = 0;
    std::size_t df_within = 0;
};

using CdfFn = std::function<double(double)>;

// D = sup |F_n - F| over the empirical step function, evaluated at the sorted
// sample with both one-sided gaps.
double ks_statistic(std::vector<double> samples, const CdfFn& cdf);

// Asymptotic Kolmogorov survival with the small-sample effective-n correction
// lambda = (sqrt(n) + 0.12 + 0.11/sqrt(n)) D.
double ks_pvalue(double d, std::size_t n);

// W = 1/(12N) + sum_i [(2i-1)/(2N) - F(x_(i))]^2
double cvm_statistic(std::vector<double> samples, const CdfFn& cdf);

// Monte Carlo p-value under the uniform null: (1 + #{W_sim >= W}) / (M + 1)
// with M = 2000 simulated samples of size n; deterministic per seed.
double cvm_pvalue(double w, std::size_t n, std::uint64_t seed, Exec exec = Exec::Parallel);

// One-way ANOVA F on flat groups; p from the F survival function.
VarResult anova_f(const std::vector<std::vector<double>>& groups);

// Brown-Forsythe style Levene: symmetric tail trimming, absolute deviations
// from the trimmed-group median, then the ANOVA-type ratio of Eq-style mean
// squares. p from F(m-1, N-m).
VarResult levene(const std::vector<std::vector<double>>& groups, double trim_fraction = 0.05);

struct GofAggregate {
    double stat_mean = 0.0;
    double stat_var = 0.0;
    double p_mean = 0.0;
    double p_var = 0.0;
};

struct GofEntry {
    core::ClassId cls = core::ClassId::Background;
    dist::Family family = dist::Family::Gamma;
    GofAggregate ks;
    GofAggregate cvm;
    std::size_t n_scans = 0;   // scans that produced a fit
    std::size_t n_excluded = 0; // scans whose fit failed
};

struct GofReport {
    std::vector<GofEntry> entries;
};

// Per (class, family): fit per scan, test the fitted CDF on the same scan's
// samples (parameters estimated from the tested sample, as in the source
// method; the resulting p-value bias is documented, not corrected), aggregate
// mean/variance across scans. Variances are population variances, so a single
// scan reports 0.
GofReport gof_report(const std::vector<GroupSamples>& class_samples,
                     const std::vector<dist::Family>& families, std::uint64_t seed,
                     Exec exec = Exec::Parallel);

struct VarReport {
    std::vector<std::pair<core::ClassId, VarResult>> levene_per_class;
    struct PairRow {
        core::ClassId first = core::ClassId::Background;
        core::ClassId second = core::ClassId::Background;
        VarResult result;
    };
    std::vector<PairRow> anova_per_pair;
};

// Levene across B-scans within each class first, then ANOVA per class pair on
// the pooled class samples.
VarReport var_report(const std::vector<GroupSamples>& class_samples,
                     double trim_fraction = 0.05);

nlohmann::json to_json(const GofReport& report);
nlohmann::json to_json(const VarReport& report);

} // namespace specstat::stats
