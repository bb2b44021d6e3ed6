#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "specstat/dist/dist.hpp"
#include "specstat/dist/special.hpp"
#include "specstat/stats/stats.hpp"

using namespace specstat;
using dist::DistParams;
using dist::Family;

namespace {

// total log-likelihood of a parameter grid point
double total_ll(const DistParams& p, const std::vector<double>& xs) {
    double ll = 0.0;
    for (double x : xs)
        ll += dist::log_pdf(p, x);
    return ll;
}

// no point on a 101x101 grid (+-10% box) may beat the fitted likelihood;
// 1-parameter families degenerate to a 101-point line
void check_local_maximizer(const std::vector<double>& xs, const dist::MLEResult& fit) {
    const double a0 = fit.params.a, b0 = fit.params.b;
    double best = fit.log_likelihood;
    for (int i = 0; i <= 100; ++i) {
        const double a = a0 * (0.9 + 0.2 * i / 100.0);
        for (int j = 0; j <= 100; ++j) {
            DistParams p = fit.params;
            p.a = a;
            if (b0 != 0.0)
                p.b = b0 * (0.9 + 0.2 * j / 100.0);
            else if (j > 0)
                break;
            try {
                best = std::max(best, total_ll(p, xs));
            } catch (const Error&) {
                // grid point outside the valid domain
            }
        }
    }
    CHECK(best <= fit.log_likelihood + 1e-6);
}

DistParams reference_params(Family f) {
    switch (f) {
    case Family::Gamma: return DistParams::gamma(5.0, 20.0);
    case Family::Rayleigh: return DistParams::rayleigh(3.0);
    case Family::Normal: return DistParams::normal(2.0, 1.5);
    case Family::Burr: return DistParams::burr(3.0, 2.0);
    case Family::Lognormal: return DistParams::lognormal(0.6, 1.2);
    case Family::Nakagami: return DistParams::nakagami(2.5, 4.0);
    }
    FAIL("unknown family");
    return {};
}

} // namespace

TEST_SUITE("dist") {

TEST_CASE("log_gamma matches known values and the recurrence") {
    CHECK(dist::log_gamma(1.0) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(dist::log_gamma(5.0) == doctest::Approx(std::log(24.0)).epsilon(1e-14));
    CHECK(dist::log_gamma(0.5) == doctest::Approx(0.5 * std::log(3.14159265358979323846)).epsilon(1e-14));
    // Gamma(x+1) = x Gamma(x) across the required range
    for (double x : {1e-3, 0.2, 1.7, 42.0, 1e4, 1e6}) {
        const double lhs = dist::log_gamma(x + 1.0);
        const double rhs = dist::log_gamma(x) + std::log(x);
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
    CHECK_THROWS_AS(dist::log_gamma(0.0), Error);
}

TEST_CASE("digamma agrees with the series oracle to 1e-10") {
    // psi(1) = -Euler-Mascheroni
    CHECK(dist::digamma(1.0) == doctest::Approx(-0.57721566490153286).epsilon(1e-12));
    for (double x : {0.5, 1.0, 2.5, 7.25, 19.0}) {
        const double ours = dist::digamma(x);
        const double ref = oracle::digamma_series(x);
        CHECK(std::fabs(ours - ref) <= 1e-10 * std::max(1.0, std::fabs(ref)));
    }
    CHECK_THROWS_AS(dist::digamma(-1.0), Error);
}

TEST_CASE("trigamma: known value and recurrence") {
    CHECK(dist::trigamma(1.0) ==
          doctest::Approx(3.14159265358979323846 * 3.14159265358979323846 / 6.0).epsilon(1e-12));
    for (double x : {0.3, 1.5, 8.0, 123.0})
        CHECK(dist::trigamma(x + 1.0) ==
              doctest::Approx(dist::trigamma(x) - 1.0 / (x * x)).epsilon(1e-11));
}

TEST_CASE("closed-form pdf/cdf spot values") {
    // Burr Type III cdf at x=1, c=d=1: (1+1)^-1
    CHECK(dist::cdf(DistParams::burr(1, 1), 1.0) == doctest::Approx(0.5).epsilon(1e-14));
    // Rayleigh cdf at x = sigma
    CHECK(dist::cdf(DistParams::rayleigh(2.0), 2.0) ==
          doctest::Approx(1.0 - std::exp(-0.5)).epsilon(1e-14));
    // Gamma(2,1) pdf at 1 is e^-1
    CHECK(std::exp(dist::log_pdf(DistParams::gamma(2, 1), 1.0)) ==
          doctest::Approx(std::exp(-1.0)).epsilon(1e-13));
}

TEST_CASE("pdf integrates to one for every family") {
    for (auto f : dist::kAllFamilies) {
        DistParams p = reference_params(f);
        // bracket the support through the cdf
        double lo = dist::positive_support(f) ? 1e-6 : -1.0;
        double hi = 1.0;
        while (dist::cdf(p, hi) < 1.0 - 1e-10)
            hi *= 2.0;
        if (!dist::positive_support(f)) {
            lo = -1.0;
            while (dist::cdf(p, lo) > 1e-12)
                lo *= 2.0;
        }
        auto pdf = [&](double x) { return std::exp(dist::log_pdf(p, x)); };
        const double mass = oracle::adaptive_simpson(pdf, lo, hi, 1e-8);
        CHECK(mass == doctest::Approx(1.0).epsilon(1e-4));
    }
}

TEST_CASE("cdf is nondecreasing with the right limits") {
    for (auto f : dist::kAllFamilies) {
        DistParams p = reference_params(f);
        if (dist::positive_support(f))
            CHECK(dist::cdf(p, 1e-7) <= 1e-5);
        double prev = -1.0;
        for (int i = 0; i <= 10000; ++i) {
            const double x = -10.0 + 300.0 * i / 10000.0;
            const double c = dist::cdf(p, x);
            CHECK(c >= prev);
            prev = c;
        }
        CHECK(dist::cdf(p, 1e9) == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("probability integral transform is uniform (KS p > 0.001)") {
    for (auto f : dist::kAllFamilies) {
        DistParams p = reference_params(f);
        auto xs = dist::sample(p, 2024, 10000);
        std::vector<double> u(xs.size());
        for (std::size_t i = 0; i < xs.size(); ++i)
            u[i] = dist::cdf(p, xs[i]);
        const double d = stats::ks_statistic(u, [](double x) { return x; });
        const double pval = stats::ks_pvalue(d, u.size());
        INFO("family ", dist::to_string(f), " KS p = ", pval);
        CHECK(pval > 0.001);
    }
}

TEST_CASE("rayleigh sampling is the stated inverse-CDF transform") {
    const double sigma = 1.7;
    DistParams p = DistParams::rayleigh(sigma);
    // u = 1 - exp(-1/2) maps to x = sigma, and cdf inverts the transform
    const double u = 1.0 - std::exp(-0.5);
    const double x = sigma * std::sqrt(-2.0 * std::log(1.0 - u));
    CHECK(x == doctest::Approx(sigma).epsilon(1e-14));
    for (double q : {0.1, 0.5, 0.9}) {
        const double xq = sigma * std::sqrt(-2.0 * std::log(1.0 - q));
        CHECK(dist::cdf(p, xq) == doctest::Approx(q).epsilon(1e-12));
    }
}

TEST_CASE("sampling: determinism and the law of large numbers") {
    auto a = dist::sample(DistParams::gamma(5, 2), 99, 1000);
    auto b = dist::sample(DistParams::gamma(5, 2), 99, 1000);
    CHECK(a == b);

    auto big = dist::sample(DistParams::gamma(5, 2), 1234, 1000000);
    double mean = 0.0;
    for (double x : big)
        mean += x;
    mean /= static_cast<double>(big.size());
    CHECK(mean == doctest::Approx(10.0).epsilon(0.01)); // k*theta = 10

    // support check on every family
    for (auto f : dist::kAllFamilies) {
        auto xs = dist::sample(reference_params(f), 5, 1000);
        if (dist::positive_support(f))
            for (double x : xs)
                CHECK(x > 0.0);
    }
}

TEST_CASE("closed-form fits") {
    SUBCASE("normal {1,2,3}") {
        auto fit = dist::mle_fit(Family::Normal, {1, 2, 3});
        CHECK(fit.params.a == doctest::Approx(2.0).epsilon(1e-14));
        CHECK(fit.params.b == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-14));
        CHECK(fit.converged);
        CHECK(fit.iterations == 0);
    }
    SUBCASE("rayleigh {1,1} with a grid-search cross-check") {
        auto fit = dist::mle_fit(Family::Rayleigh, {1, 1});
        CHECK(fit.params.a == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
        double best_grid = -1e300;
        double best_sigma = 0.0;
        for (int i = 1; i <= 4000; ++i) {
            const double sigma = 2.0 * i / 4000.0;
            const double ll = total_ll(DistParams::rayleigh(sigma), {1, 1});
            if (ll > best_grid) {
                best_grid = ll;
                best_sigma = sigma;
            }
        }
        CHECK(best_sigma == doctest::Approx(fit.params.a).epsilon(1e-3));
        CHECK(fit.log_likelihood >= best_grid - 1e-9);
    }
    SUBCASE("constant samples degenerate") {
        for (auto f : {Family::Normal, Family::Gamma, Family::Lognormal, Family::Nakagami,
                       Family::Burr}) {
            try {
                dist::mle_fit(f, {4, 4, 4, 4, 4});
                FAIL("expected DegenerateSample for ", dist::to_string(f));
            } catch (const Error& e) {
                CHECK(e.code() == "DegenerateSample");
            }
        }
        // Rayleigh stays defined on constant samples
        CHECK_NOTHROW(dist::mle_fit(Family::Rayleigh, {4, 4, 4, 4, 4}));
    }
}

TEST_CASE("gamma fit: generate-and-refit within 3% plus grid confirmation") {
    auto xs = dist::sample(DistParams::gamma(5, 20), 77, 100000);
    auto fit = dist::mle_fit(Family::Gamma, xs);
    CHECK(fit.params.a == doctest::Approx(5.0).epsilon(0.03));
    CHECK(fit.params.b == doctest::Approx(20.0).epsilon(0.03));
    CHECK(fit.converged);
    CHECK(fit.iterations <= 30);

    std::vector<double> small(xs.begin(), xs.begin() + 500);
    auto small_fit = dist::mle_fit(Family::Gamma, small);
    check_local_maximizer(small, small_fit);
}

TEST_CASE("every family recovers its own parameters (5%, burr 10%)") {
    for (auto f : dist::kAllFamilies) {
        DistParams truth = reference_params(f);
        const double tol = f == Family::Burr ? 0.10 : 0.05;
        for (std::uint64_t seed : {11u, 22u, 33u}) {
            auto xs = dist::sample(truth, seed, 20000);
            auto fit = dist::mle_fit(f, xs);
            INFO("family ", dist::to_string(f), " seed ", seed);
            CHECK(fit.params.a == doctest::Approx(truth.a).epsilon(tol));
            if (f != Family::Rayleigh)
                CHECK(fit.params.b == doctest::Approx(truth.b).epsilon(tol));
            CHECK(fit.converged);
        }
    }
}

TEST_CASE("fit is a local maximizer on the 101x101 grid for every family") {
    for (auto f : dist::kAllFamilies) {
        auto xs = dist::sample(reference_params(f), 4242, 500);
        auto fit = dist::mle_fit(f, xs);
        INFO("family ", dist::to_string(f));
        check_local_maximizer(xs, fit);
    }
}

TEST_CASE("reported parameter counts per family match the parameterization") {
    CHECK(dist::reported_param_names(Family::Gamma) == std::vector<std::string>{"k", "theta"});
    CHECK(dist::reported_param_names(Family::Burr) == std::vector<std::string>{"c", "d"});
    CHECK(dist::reported_param_names(Family::Normal) == std::vector<std::string>{"mu", "sigma"});
    CHECK(dist::reported_param_names(Family::Rayleigh) == std::vector<std::string>{"sigma"});
    CHECK(dist::reported_param_names(Family::Lognormal) == std::vector<std::string>{"s"});
    CHECK(dist::reported_param_names(Family::Nakagami) == std::vector<std::string>{"nu"});
}

TEST_CASE("invalid parameters are rejected") {
    CHECK_THROWS_AS(dist::log_pdf(DistParams::gamma(-1, 2), 1.0), Error);
    CHECK_THROWS_AS(dist::cdf(DistParams::normal(0, 0), 1.0), Error);
    CHECK_THROWS_AS(dist::sample(DistParams::burr(1, -2), 1, 10), Error);
}

} // TEST_SUITE
