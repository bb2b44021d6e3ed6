// Test-only independent oracles. Everything here deliberately avoids the
// library's own code paths: series instead of recurrences, quadrature instead
// of closed forms, double loops instead of distance transforms.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "specstat/core/types.hpp"

namespace oracle {

// psi(x) from the defining series psi(x) = -gamma + sum_k (1/(k+1) - 1/(k+x)),
// with a first-order tail correction; error O((x-1)/K^2).
inline double digamma_series(double x) {
    constexpr double kEulerMascheroni = 0.57721566490153286060651209;
    constexpr long K = 2'000'000;
    double sum = 0.0;
    for (long k = K - 1; k >= 0; --k)
        sum += 1.0 / (k + 1.0) - 1.0 / (k + x);
    sum += (x - 1.0) / static_cast<double>(K); // tail: integral approximation
    return -kEulerMascheroni + sum;
}

inline double simpson(const std::function<double(double)>& f, double a, double b) {
    return (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b));
}

inline double adaptive_simpson_rec(const std::function<double(double)>& f, double a, double b,
                                   double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double left = simpson(f, a, m);
    const double right = simpson(f, m, b);
    if (depth <= 0 || std::fabs(left + right - whole) < 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return adaptive_simpson_rec(f, a, m, left, 0.5 * tol, depth - 1) +
           adaptive_simpson_rec(f, m, b, right, 0.5 * tol, depth - 1);
}

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double tol = 1e-9) {
    return adaptive_simpson_rec(f, a, b, simpson(f, a, b), tol, 48);
}

// O(|A| |B|) Hausdorff double loop.
inline double brute_hausdorff(const specstat::core::LabelMap& a,
                              const specstat::core::LabelMap& b) {
    std::vector<std::pair<int, int>> pa, pb;
    for (int y = 0; y < a.height; ++y)
        for (int x = 0; x < a.width; ++x) {
            if (a.at(y, x))
                pa.emplace_back(y, x);
            if (b.at(y, x))
                pb.emplace_back(y, x);
        }
    if (pa.empty() && pb.empty())
        return 0.0;
    if (pa.empty() || pb.empty())
        return std::hypot(static_cast<double>(a.height), static_cast<double>(a.width));
    auto directed = [](const std::vector<std::pair<int, int>>& from,
                       const std::vector<std::pair<int, int>>& to) {
        double worst = 0.0;
        for (const auto& p : from) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& q : to) {
                const double dy = p.first - q.first, dx = p.second - q.second;
                best = std::min(best, dy * dy + dx * dx);
            }
            worst = std::max(worst, best);
        }
        return std::sqrt(worst);
    };
    return std::max(directed(pa, pb), directed(pb, pa));
}

// two-sample KS statistic
inline double two_sample_ks(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        if (a[i] <= b[j])
            ++i;
        else
            ++j;
        const double fa = static_cast<double>(i) / static_cast<double>(a.size());
        const double fb = static_cast<double>(j) / static_cast<double>(b.size());
        d = std::max(d, std::fabs(fa - fb));
    }
    return d;
}

// CVM W of an already sorted sample against the identity CDF; used by the
// independent Monte Carlo null (std::mt19937_64, not the library generator).
inline double cvm_w_sorted_uniform(const std::vector<double>& u) {
    const std::size_t n = u.size();
    double w = 1.0 / (12.0 * static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const double plot = (2.0 * (i + 1.0) - 1.0) / (2.0 * static_cast<double>(n));
        w += (plot - u[i]) * (plot - u[i]);
    }
    return w;
}

// empirical D of a sample against a cdf, direct EDF enumeration
inline double ks_d(std::vector<double> xs, const std::function<double(double)>& cdf) {
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double f = cdf(xs[i]);
        d = std::max({d, (i + 1.0) / n - f, f - static_cast<double>(i) / n});
    }
    return d;
}

} // namespace oracle
