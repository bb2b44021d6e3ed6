#include "specstat/evalmetrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "specstat/error.hpp"

namespace specstat::evalmetrics {

double dice(const core::LabelMap& a, const core::LabelMap& b) {
    require(a.height == b.height && a.width == b.width, "DimensionMismatch",
            "dice requires equal mask dimensions");
    std::size_t inter = 0, count_a = 0, count_b = 0;
    for (std::size_t i = 0; i < a.mask.size(); ++i) {
        const bool va = a.mask[i] != 0, vb = b.mask[i] != 0;
        inter += va && vb;
        count_a += va;
        count_b += vb;
    }
    if (count_a + count_b == 0)
        return 1.0;
    return 2.0 * static_cast<double>(inter) / static_cast<double>(count_a + count_b);
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// 1-D squared distance transform of a sampled function (lower envelope of
// parabolas rooted at (i, f[i])).
void edt_1d(const double* f, double* d, int n, int* v, double* z) {
    int k = 0;
    v[0] = 0;
    z[0] = -kInf;
    z[1] = kInf;
    for (int q = 1; q < n; ++q) {
        if (f[q] == kInf)
            continue;
        double s;
        for (;;) {
            if (f[v[k]] == kInf) {
                // previous vertex unset: replace it outright
                if (k > 0) {
                    --k;
                    continue;
                }
                v[0] = q;
                z[0] = -kInf;
                z[1] = kInf;
                break;
            }
            s = ((f[q] + static_cast<double>(q) * q) - (f[v[k]] + static_cast<double>(v[k]) * v[k])) /
                (2.0 * q - 2.0 * v[k]);
            if (s <= z[k]) {
                --k;
                continue;
            }
            ++k;
            v[k] = q;
            z[k] = s;
            z[k + 1] = kInf;
            break;
        }
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q)
            ++k;
        if (f[v[k]] == kInf) {
            d[q] = kInf;
        } else {
            const double dq = q - v[k];
            d[q] = dq * dq + f[v[k]];
        }
    }
}

} // namespace

std::vector<double> squared_distance_transform(const core::LabelMap& mask, Exec exec) {
    const int h = mask.height, w = mask.width;
    std::vector<double> dist(static_cast<std::size_t>(h) * w);

    // columns first: squared vertical distance to the nearest set pixel
    parallel_for(
        w,
        [&](std::int64_t x) {
            std::vector<double> f(static_cast<std::size_t>(h)), d(static_cast<std::size_t>(h));
            std::vector<int> v(static_cast<std::size_t>(h));
            std::vector<double> z(static_cast<std::size_t>(h) + 1);
            for (int y = 0; y < h; ++y)
                f[static_cast<std::size_t>(y)] = mask.at(y, static_cast<int>(x)) ? 0.0 : kInf;
            edt_1d(f.data(), d.data(), h, v.data(), z.data());
            for (int y = 0; y < h; ++y)
                dist[static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)] =
                    d[static_cast<std::size_t>(y)];
        },
        exec);

    // then rows over the column results
    std::vector<double> out(dist.size());
    parallel_for(
        h,
        [&](std::int64_t y) {
            std::vector<double> d(static_cast<std::size_t>(w));
            std::vector<int> v(static_cast<std::size_t>(w));
            std::vector<double> z(static_cast<std::size_t>(w) + 1);
            const double* f = dist.data() + static_cast<std::size_t>(y) * w;
            edt_1d(f, d.data(), w, v.data(), z.data());
            for (int x = 0; x < w; ++x)
                out[static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)] =
                    d[static_cast<std::size_t>(x)];
        },
        exec);
    return out;
}

namespace {

// directed distances d(a, B) for every a in A, sorted ascending
std::vector<double> directed_distances(const core::LabelMap& a, const std::vector<double>& dt_b) {
    std::vector<double> out;
    for (std::size_t i = 0; i < a.mask.size(); ++i)
        if (a.mask[i])
            out.push_back(std::sqrt(dt_b[i]));
    std::sort(out.begin(), out.end());
    return out;
}

double percentile_of(const std::vector<double>& sorted, double percentile) {
    if (percentile >= 100.0)
        return sorted.back();
    const double rank = percentile / 100.0 * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(rank));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = rank - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

} // namespace

double hausdorff(const core::LabelMap& a, const core::LabelMap& b, double percentile, Exec exec) {
    require(a.height == b.height && a.width == b.width, "DimensionMismatch",
            "hausdorff requires equal mask dimensions");
    const std::size_t na = a.count(), nb = b.count();
    if (na == 0 && nb == 0)
        return 0.0;
    if (na == 0 || nb == 0)
        return std::hypot(static_cast<double>(a.height), static_cast<double>(a.width));

    auto dt_a = squared_distance_transform(a, exec);
    auto dt_b = squared_distance_transform(b, exec);
    auto d_ab = directed_distances(a, dt_b);
    auto d_ba = directed_distances(b, dt_a);
    return std::max(percentile_of(d_ab, percentile), percentile_of(d_ba, percentile));
}

MetricsSummary summarize(const std::vector<ScanClassMetric>& rows) {
    require(!rows.empty(), "EmptyInput", "summarize needs at least one scan");

    auto aggregate = [](const std::vector<double>& xs) {
        Aggregate a;
        a.min = xs[0];
        a.max = xs[0];
        for (double x : xs) {
            a.mean += x;
            a.min = std::min(a.min, x);
            a.max = std::max(a.max, x);
        }
        a.mean /= static_cast<double>(xs.size());
        return a;
    };

    MetricsSummary summary;
    std::set<std::string> scans;
    std::vector<double> pooled_dice, pooled_hd;
    for (auto cls : core::kForegroundClasses) {
        std::vector<double> dices, hds;
        for (const auto& row : rows) {
            scans.insert(row.scan);
            if (row.cls != cls)
                continue;
            dices.push_back(row.dice);
            hds.push_back(row.hausdorff);
            pooled_dice.push_back(row.dice);
            pooled_hd.push_back(row.hausdorff);
        }
        if (dices.empty())
            continue;
        ClassSummary cs;
        cs.dice = aggregate(dices);
        cs.hausdorff = aggregate(hds);
        cs.n = dices.size();
        summary.per_class.emplace_back(cls, cs);
    }
    // pooled over all (scan, class) pairs, not over class means
    summary.pooled.dice = aggregate(pooled_dice);
    summary.pooled.hausdorff = aggregate(pooled_hd);
    summary.pooled.n = pooled_dice.size();
    summary.n_scans = scans.size();
    return summary;
}

namespace {

nlohmann::json aggregate_json(const Aggregate& a) {
    return {{"mean", a.mean}, {"min", a.min}, {"max", a.max}};
}

nlohmann::json class_summary_json(const ClassSummary& s) {
    return {{"dice", aggregate_json(s.dice)}, {"hausdorff", aggregate_json(s.hausdorff)}};
}

} // namespace

nlohmann::json to_json(const MetricsSummary& summary) {
    nlohmann::json per_class;
    for (const auto& [cls, cs] : summary.per_class)
        per_class[core::to_string(cls)] = class_summary_json(cs);
    return {{"per_class", per_class},
            {"pooled", class_summary_json(summary.pooled)},
            {"n_scans", summary.n_scans},
            {"hausdorff_units", "pixels"}};
}

} // namespace specstat::evalmetrics
