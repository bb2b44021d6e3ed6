#include "specstat/stats/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "specstat/dist/special.hpp"
#include "specstat/error.hpp"
#include "specstat/rng.hpp"

namespace specstat::stats {

namespace {

constexpr int kCvmReplicates = 2000;

double mean_of(const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs)
        s += x;
    return s / static_cast<double>(xs.size());
}

// W statistic on an already sorted sample against an already evaluated cdf.
double cvm_on_sorted_cdf(const std::vector<double>& f_values) {
    const std::size_t n = f_values.size();
    double w = 1.0 / (12.0 * static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        double plotting = (2.0 * static_cast<double>(i + 1) - 1.0) / (2.0 * static_cast<double>(n));
        double diff = plotting - f_values[i];
        w += diff * diff;
    }
    return w;
}

} // namespace

double ks_statistic(std::vector<double> samples, const CdfFn& cdf) {
    require(samples.size() >= 2, "EmptyInput", "ks_statistic needs at least 2 samples");
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double f = cdf(samples[i]);
        const double hi = (static_cast<double>(i) + 1.0) / n - f;
        const double lo = f - static_cast<double>(i) / n;
        d = std::max(d, std::max(hi, lo));
    }
    return d;
}

double ks_pvalue(double d, std::size_t n) {
    require(d >= 0.0 && d <= 1.0, "InvalidParams", "KS statistic must lie in [0, 1]");
    const double sqrt_n = std::sqrt(static_cast<double>(n));
    const double lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d;
    if (lambda < 1e-6)
        return 1.0;
    double sum = 0.0;
    double sign = 1.0;
    for (int k = 1; k <= 100000; ++k) {
        double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += sign * term;
        if (term < 1e-12)
            break;
        sign = -sign;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

double cvm_statistic(std::vector<double> samples, const CdfFn& cdf) {
    require(samples.size() >= 2, "EmptyInput", "cvm_statistic needs at least 2 samples");
    std::sort(samples.begin(), samples.end());
    std::vector<double> f_values(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i)
        f_values[i] = cdf(samples[i]);
    return cvm_on_sorted_cdf(f_values);
}

double cvm_pvalue(double w, std::size_t n, std::uint64_t seed, Exec exec) {
    require(w >= 0.0, "InvalidParams", "CVM statistic must be >= 0");
    require(n >= 2, "InvalidParams", "CVM p-value needs n >= 2");
    std::vector<double> sims(kCvmReplicates);
    parallel_for(
        kCvmReplicates,
        [&](std::int64_t rep) {
            Rng rng(derive_seed(seed, static_cast<std::uint64_t>(rep)));
            std::vector<double> u(n);
            for (auto& v : u)
                v = rng.uniform01();
            std::sort(u.begin(), u.end());
            sims[static_cast<std::size_t>(rep)] = cvm_on_sorted_cdf(u); // identity cdf
        },
        exec);
    std::size_t exceed = 0;
    for (double s : sims)
        exceed += s >= w;
    return static_cast<double>(1 + exceed) / static_cast<double>(kCvmReplicates + 1);
}

VarResult anova_f(const std::vector<std::vector<double>>& groups) {
    require(groups.size() >= 2, "InvalidParams", "ANOVA needs at least 2 groups");
    const std::size_t m = groups.size();
    std::size_t total = 0;
    double grand_sum = 0.0;
    for (const auto& g : groups) {
        require(g.size() >= 2, "InvalidParams", "every ANOVA group needs at least 2 samples");
        total += g.size();
        for (double x : g)
            grand_sum += x;
    }
    const double grand_mean = grand_sum / static_cast<double>(total);

    double ss_between = 0.0;
    double ss_within = 0.0;
    for (const auto& g : groups) {
        const double gm = mean_of(g);
        const double delta = gm - grand_mean;
        ss_between += static_cast<double>(g.size()) * delta * delta;
        for (double x : g)
            ss_within += (x - gm) * (x - gm);
    }

    VarResult r;
    r.test = VarTest::Anova;
    r.df_between = m - 1;
    r.df_within = total - m;
    const double ms_between = ss_between / static_cast<double>(r.df_between);
    const double ms_within = ss_within / static_cast<double>(r.df_within);
    if (ms_within == 0.0) {
        if (ms_between == 0.0) {
            r.statistic = 0.0;
            r.p_value = 1.0;
        } else {
            r.statistic = std::numeric_limits<double>::infinity();
            r.p_value = 0.0;
        }
        return r;
    }
    r.statistic = ms_between / ms_within;
    r.p_value = dist::f_survival(r.statistic, static_cast<double>(r.df_between),
                                 static_cast<double>(r.df_within));
    return r;
}

VarResult levene(const std::vector<std::vector<double>>& groups, double trim_fraction) {
    require(groups.size() >= 2, "InvalidParams", "Levene needs at least 2 groups");
    require(trim_fraction >= 0.0 && trim_fraction < 0.5, "InvalidParams",
            "trim fraction must lie in [0, 0.5)");

    // Per group: trim floor(trim*n) from each tail, take absolute deviations
    // from the trimmed median.
    std::vector<std::vector<double>> z_groups;
    z_groups.reserve(groups.size());
    for (const auto& g : groups) {
        require(g.size() >= 3, "InvalidParams", "every Levene group needs at least 3 samples");
        std::vector<double> sorted(g);
        std::sort(sorted.begin(), sorted.end());
        const std::size_t t = static_cast<std::size_t>(
            std::floor(trim_fraction * static_cast<double>(sorted.size())));
        require(sorted.size() > 2 * t + 1, "InvalidParams", "group too small after trimming");
        std::vector<double> trimmed(sorted.begin() + static_cast<std::ptrdiff_t>(t),
                                    sorted.end() - static_cast<std::ptrdiff_t>(t));
        const std::size_t k = trimmed.size();
        const double median =
            (k % 2 == 1) ? trimmed[k / 2] : 0.5 * (trimmed[k / 2 - 1] + trimmed[k / 2]);
        std::vector<double> z(k);
        for (std::size_t i = 0; i < k; ++i)
            z[i] = std::fabs(trimmed[i] - median);
        z_groups.push_back(std::move(z));
    }

    const std::size_t m = z_groups.size();
    std::size_t total = 0;
    double grand_sum = 0.0;
    for (const auto& z : z_groups) {
        total += z.size();
        for (double v : z)
            grand_sum += v;
    }
    const double grand_mean = grand_sum / static_cast<double>(total);

    double numerator = 0.0; // sum n_j (Zbar_j - Zbar)^2
    double denominator = 0.0; // sum_j sum_k (Z_jk - Zbar_j)^2
    for (const auto& z : z_groups) {
        const double zm = mean_of(z);
        const double delta = zm - grand_mean;
        numerator += static_cast<double>(z.size()) * delta * delta;
        for (double v : z)
            denominator += (v - zm) * (v - zm);
    }

    VarResult r;
    r.test = VarTest::Levene;
    r.df_between = m - 1;
    r.df_within = total - m;
    const double scale = static_cast<double>(r.df_within) / static_cast<double>(r.df_between);
    if (numerator == 0.0) {
        r.statistic = 0.0;
        r.p_value = 1.0;
        return r;
    }
    if (denominator == 0.0) {
        r.statistic = std::numeric_limits<double>::infinity();
        r.p_value = 0.0;
        return r;
    }
    r.statistic = scale * numerator / denominator;
    r.p_value = dist::f_survival(r.statistic, static_cast<double>(r.df_between),
                                 static_cast<double>(r.df_within));
    return r;
}

namespace {

GofAggregate aggregate(const std::vector<double>& stats, const std::vector<double>& ps) {
    GofAggregate a;
    if (stats.empty())
        return a;
    a.stat_mean = mean_of(stats);
    a.p_mean = mean_of(ps);
    for (std::size_t i = 0; i < stats.size(); ++i) {
        a.stat_var += (stats[i] - a.stat_mean) * (stats[i] - a.stat_mean);
        a.p_var += (ps[i] - a.p_mean) * (ps[i] - a.p_mean);
    }
    a.stat_var /= static_cast<double>(stats.size());
    a.p_var /= static_cast<double>(ps.size());
    return a;
}

} // namespace

GofReport gof_report(const std::vector<GroupSamples>& class_samples,
                     const std::vector<dist::Family>& families, std::uint64_t seed, Exec exec) {
    GofReport report;
    for (const auto& group : class_samples) {
        for (const auto& s : group.per_scan)
            require(!s.empty(), "EmptyInput", "every scan's sample list must be nonempty");

        for (auto family : families) {
            const std::size_t n_scans = group.per_scan.size();
            struct ScanOutcome {
                bool ok = false;
                double ks_stat = 0.0, ks_p = 0.0, cvm_stat = 0.0, cvm_p = 0.0;
            };
            std::vector<ScanOutcome> outcomes(n_scans);

            parallel_for_dynamic(
                static_cast<std::int64_t>(n_scans),
                [&](std::int64_t j) {
                    const auto& samples = group.per_scan[static_cast<std::size_t>(j)];
                    auto& out = outcomes[static_cast<std::size_t>(j)];
                    try {
                        dist::MLEResult fit = dist::mle_fit(family, samples);
                        auto fitted_cdf = [&fit](double x) { return dist::cdf(fit.params, x); };
                        out.ks_stat = ks_statistic(samples, fitted_cdf);
                        out.ks_p = ks_pvalue(out.ks_stat, samples.size());
                        out.cvm_stat = cvm_statistic(samples, fitted_cdf);
                        // the inner Monte Carlo stays serial; parallelism lives here
                        out.cvm_p = cvm_pvalue(out.cvm_stat, samples.size(),
                                               derive_seed(seed, static_cast<std::uint64_t>(j)),
                                               Exec::Serial);
                        out.ok = true;
                    } catch (const Error&) {
                        out.ok = false;
                    }
                },
                exec);

            GofEntry entry;
            entry.cls = group.cls;
            entry.family = family;
            std::vector<double> ks_stats, ks_ps, cvm_stats, cvm_ps;
            for (const auto& out : outcomes) { // aggregation in scan-index order
                if (!out.ok) {
                    ++entry.n_excluded;
                    continue;
                }
                ks_stats.push_back(out.ks_stat);
                ks_ps.push_back(out.ks_p);
                cvm_stats.push_back(out.cvm_stat);
                cvm_ps.push_back(out.cvm_p);
            }
            entry.n_scans = ks_stats.size();
            entry.ks = aggregate(ks_stats, ks_ps);
            entry.cvm = aggregate(cvm_stats, cvm_ps);
            report.entries.push_back(entry);
        }
    }
    return report;
}

VarReport var_report(const std::vector<GroupSamples>& class_samples, double trim_fraction) {
    VarReport report;
    // homogeneity across B-scans within each class first
    for (const auto& group : class_samples) {
        if (group.per_scan.size() < 2)
            continue;
        report.levene_per_class.emplace_back(group.cls, levene(group.per_scan, trim_fraction));
    }
    // then heterogeneity between classes, pairwise on pooled samples
    for (std::size_t i = 0; i < class_samples.size(); ++i) {
        for (std::size_t j = i + 1; j < class_samples.size(); ++j) {
            std::vector<double> pooled_a, pooled_b;
            for (const auto& s : class_samples[i].per_scan)
                pooled_a.insert(pooled_a.end(), s.begin(), s.end());
            for (const auto& s : class_samples[j].per_scan)
                pooled_b.insert(pooled_b.end(), s.begin(), s.end());
            VarReport::PairRow row;
            row.first = class_samples[i].cls;
            row.second = class_samples[j].cls;
            row.result = anova_f({pooled_a, pooled_b});
            report.anova_per_pair.push_back(std::move(row));
        }
    }
    return report;
}

namespace {

nlohmann::json aggregate_json(const GofAggregate& a, std::size_t n_scans) {
    return {{"stat_mean", a.stat_mean},
            {"stat_var", a.stat_var},
            {"p_mean", a.p_mean},
            {"p_var", a.p_var},
            {"n_scans", n_scans}};
}

nlohmann::json var_result_json(const VarResult& r) {
    return {{"test", r.test == VarTest::Anova ? "anova" : "levene"},
            {"statistic", r.statistic},
            {"p_value", r.p_value},
            {"df_between", r.df_between},
            {"df_within", r.df_within}};
}

} // namespace

nlohmann::json to_json(const GofReport& report) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : report.entries) {
        entries.push_back({{"class", core::to_string(e.cls)},
                           {"family", dist::to_string(e.family)},
                           {"ks", aggregate_json(e.ks, e.n_scans)},
                           {"cvm", aggregate_json(e.cvm, e.n_scans)},
                           {"n_scans", e.n_scans},
                           {"n_excluded", e.n_excluded}});
    }
    return {{"entries", entries}};
}

nlohmann::json to_json(const VarReport& report) {
    nlohmann::json levene_rows = nlohmann::json::array();
    for (const auto& [cls, result] : report.levene_per_class) {
        auto row = var_result_json(result);
        row["class"] = core::to_string(cls);
        levene_rows.push_back(row);
    }
    nlohmann::json anova_rows = nlohmann::json::array();
    for (const auto& row : report.anova_per_pair) {
        auto j = var_result_json(row.result);
        j["classes"] = {core::to_string(row.first), core::to_string(row.second)};
        anova_rows.push_back(j);
    }
    return {{"levene", levene_rows}, {"anova", anova_rows}};
}

} // namespace specstat::stats
