#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/non_central_t.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "hetcv/numerics.hpp"

using namespace hetcv;

TEST(Probability, RejectsOutOfRange) {
    EXPECT_THROW(Probability(-0.1), DomainError);
    EXPECT_THROW(Probability(1.1), DomainError);
    EXPECT_THROW(Probability(std::nan("")), DomainError);
    EXPECT_DOUBLE_EQ(Probability(0.25).complement(), 0.75);
}

TEST(NormQuantile, KnownValues) {
    EXPECT_EQ(norm_quantile(0.5), 0.0);
    EXPECT_NEAR(norm_quantile(0.975), 1.95996398, 1e-8);
    EXPECT_NEAR(norm_quantile(0.9171), 1.386, 5e-4);
    EXPECT_THROW((void)norm_quantile(0.0), DomainError);
    EXPECT_THROW((void)norm_quantile(1.0), DomainError);
}

TEST(NormQuantile, MatchesBoostOracle) {
    boost::math::normal nd;
    for (double lp = -12.0; lp < 0.0; lp += 0.25) {
        const double p = std::pow(10.0, lp);
        EXPECT_NEAR(norm_quantile(p), boost::math::quantile(nd, p), 1e-9) << p;
        EXPECT_NEAR(norm_quantile(1.0 - p), boost::math::quantile(nd, 1.0 - p), 1e-9) << p;
    }
    for (double p = 0.01; p < 1.0; p += 0.01) {
        EXPECT_NEAR(norm_quantile(p), boost::math::quantile(nd, p), 1e-9) << p;
    }
}

TEST(NormCdf, SymmetryAndRoundTrip) {
    EXPECT_EQ(norm_cdf(0.0), 0.5);
    EXPECT_NEAR(norm_cdf(1.959964), 0.975, 1e-7);
    for (double x = 0.0; x < 8.0; x += 0.37) EXPECT_NEAR(norm_cdf(-x), 1.0 - norm_cdf(x), 1e-15);
    for (int i = 1; i < 1000; ++i) {
        const double p = 1e-6 + (1.0 - 2e-6) * i / 1000.0;
        EXPECT_NEAR(norm_cdf(norm_quantile(p)), p, 1e-9);
    }
}

TEST(CriticalValues, TwoSidedRoundTrip) {
    EXPECT_NEAR(two_sided_critical(0.05), 1.959964, 1e-6);
    EXPECT_NEAR(two_sided_alpha(1.959964), 0.05, 1e-6);
    EXPECT_EQ(two_sided_alpha(0.0), 1.0);
}

TEST(IncompleteGamma, MatchesBoostOracle) {
    for (double a : {0.5, 1.0, 2.5, 4.5, 12.0, 24.5, 100.0}) {
        for (double x : {1e-3, 0.1, 0.9, 2.0, 5.0, 11.0, 30.0, 120.0}) {
            const double ref_p = boost::math::gamma_p(a, x);
            const double ref_q = boost::math::gamma_q(a, x);
            EXPECT_NEAR(gamma_p(a, x), ref_p, 1e-13 + 1e-12 * ref_p) << a << ' ' << x;
            EXPECT_NEAR(gamma_q(a, x), ref_q, 1e-13 + 1e-12 * ref_q) << a << ' ' << x;
        }
    }
}

TEST(ChisqQuantile, KnownValues) {
    EXPECT_NEAR(chisq_quantile(0.5, 2), 2.0 * std::numbers::ln2, 1e-12);
    EXPECT_NEAR(chisq_quantile(0.95, 1), 3.841459, 1e-6);
    EXPECT_THROW((void)chisq_quantile(0.0, 3), DomainError);
    EXPECT_THROW((void)chisq_quantile(1.0, 3), DomainError);
}

TEST(ChisqQuantile, RelativeErrorAgainstBoost) {
    for (int df : {1, 2, 3, 5, 8, 9, 20, 34, 47, 100, 500}) {
        boost::math::chi_squared cs(df);
        for (double p : {1e-10, 1e-6, 0.001, 0.025, 0.0829, 0.1, 0.5, 0.9, 0.9171, 0.975, 0.999,
                         1 - 1e-8}) {
            const double ref = boost::math::quantile(cs, p);
            EXPECT_NEAR(chisq_quantile(p, df), ref, 1e-8 * ref) << df << ' ' << p;
        }
    }
}

TEST(ChisqQuantile, StrictlyIncreasingInP) {
    for (int df : {1, 4, 30}) {
        double prev = 0.0;
        for (int i = 1; i <= 99; ++i) {
            const double x = chisq_quantile(i / 100.0, df);
            EXPECT_GT(x, prev);
            prev = x;
        }
    }
}

TEST(ChisqCdf, MatchesBoost) {
    for (int df : {1, 3, 10, 48}) {
        boost::math::chi_squared cs(df);
        for (double x : {0.01, 0.5, 2.0, 9.0, 40.0, 90.0}) {
            EXPECT_NEAR(chisq_cdf(x, df), boost::math::cdf(cs, x), 1e-13);
            EXPECT_NEAR(chisq_pdf(x, df), boost::math::pdf(cs, x), 1e-13);
        }
    }
}

TEST(FindRoot, KnownValues) {
    EXPECT_NEAR(find_root([](double x) { return x - 1.0; }, 0.0, 2.0, 1e-12), 1.0, 1e-12);
    EXPECT_NEAR(find_root([](double x) { return x * x - 2.0; }, 0.0, 2.0, 1e-10),
                std::numbers::sqrt2, 1e-10);
    EXPECT_EQ(find_root([](double x) { return x; }, 0.0, 1.0, 1e-12), 0.0);
    EXPECT_THROW((void)find_root([](double x) { return x * x + 1.0; }, -1.0, 1.0, 1e-10),
                 BracketError);
}

TEST(FindRoot, HardCases) {
    // Steep, flat and reversed-orientation brackets.
    EXPECT_NEAR(find_root([](double x) { return std::exp(30.0 * x) - 2.0; }, -1.0, 1.0, 0.0),
                std::log(2.0) / 30.0, 1e-14);
    EXPECT_NEAR(find_root([](double x) { return std::pow(x - 0.3, 3); }, 0.0, 1.0, 1e-12), 0.3,
                1e-6);
    EXPECT_NEAR(find_root([](double x) { return 2.0 - x; }, 0.0, 5.0, 0.0), 2.0, 1e-15);
}

TEST(Optimize1d, KnownValues) {
    const double hp = std::numbers::pi / 2.0;
    const auto mx = optimize_1d([](double t) { return std::sin(t); }, 0.0, hp, OptimizeMode::Maximize);
    EXPECT_NEAR(mx.argopt, hp, 1e-8);
    EXPECT_NEAR(mx.value, 1.0, 1e-12);
    const auto mn = optimize_1d([](double t) { return std::cos(t); }, 0.0, hp, OptimizeMode::Minimize);
    EXPECT_NEAR(mn.argopt, hp, 1e-8);
    EXPECT_NEAR(mn.value, 0.0, 1e-12);
}

TEST(Optimize1d, DominatesRandomProbesOnMultimodalFunction) {
    auto f = [](double t) { return std::sin(9.0 * t) * std::exp(-0.3 * t) + 0.2 * std::cos(23.0 * t); };
    const double hp = std::numbers::pi / 2.0;
    const auto mx = optimize_1d(f, 0.0, hp, OptimizeMode::Maximize);
    const auto mn = optimize_1d(f, 0.0, hp, OptimizeMode::Minimize);
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> u(0.0, hp);
    for (int i = 0; i < 20000; ++i) {
        const double t = u(gen);
        EXPECT_GE(mx.value, f(t) - 1e-9);
        EXPECT_LE(mn.value, f(t) + 1e-9);
    }
}

TEST(Optimize1d, InfiniteValuesAreLegal) {
    const auto r = optimize_1d([](double t) { return t < 0.5 ? 1.0 / (0.5 - t) : kInf; }, 0.0, 1.0,
                               OptimizeMode::Maximize);
    EXPECT_TRUE(std::isinf(r.value));
    EXPECT_GE(r.argopt, 0.5);
}

TEST(RngStream, DeterministicAndStreamDependent) {
    RngStream a(42, 7), b(42, 7), c(42, 8), d(43, 7);
    for (int i = 0; i < 100; ++i) {
        const double x = a.normal();
        EXPECT_EQ(x, b.normal());
        EXPECT_NE(x, c.normal());
        EXPECT_NE(x, d.normal());
    }
}

TEST(NoncentralT, CentralMeanNearZero) {
    RngStream rng(1, 0);
    double sum = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) sum += sample_noncentral_t(200.0, 0.0, rng);
    EXPECT_NEAR(sum / n, 0.0, 0.02);
}

TEST(NoncentralT, MeanMatchesQuadratureOracle) {
    // Oracle: E[T] = ncp · E[sqrt(df / X)], X ~ χ²_df, by adaptive quadrature.
    const double df = 10.0;
    const double ncp = 2.0;
    boost::math::chi_squared cs(df);
    const double e_inv_sqrt = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        [&](double x) { return std::sqrt(df / x) * boost::math::pdf(cs, x); }, 0.0,
        std::numeric_limits<double>::infinity(), 15, 1e-12);
    const double oracle = ncp * e_inv_sqrt;
    const double closed = ncp * std::sqrt(df / 2.0) * std::tgamma((df - 1.0) / 2.0) / std::tgamma(df / 2.0);
    EXPECT_NEAR(oracle, closed, 1e-9);
    EXPECT_NEAR(oracle, boost::math::mean(boost::math::non_central_t(df, ncp)), 1e-9);

    RngStream rng(2, 0);
    double sum = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) sum += sample_noncentral_t(df, ncp, rng);
    EXPECT_NEAR(sum / n, oracle, 0.03);
    EXPECT_NEAR(sum / n, 2.1693, 0.03);
}

TEST(NoncentralT, KolmogorovSmirnovAgainstCentralT) {
    const double df = 7.0;
    const int n = 100000;
    RngStream rng(3, 0);
    std::vector<double> xs(n);
    for (auto& x : xs) x = sample_noncentral_t(df, 0.0, rng);
    std::sort(xs.begin(), xs.end());
    boost::math::students_t td(df);
    double d = 0.0;
    for (int i = 0; i < n; ++i) {
        const double f = boost::math::cdf(td, xs[static_cast<std::size_t>(i)]);
        d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
    }
    // Asymptotic critical value at significance 0.001: 1.9495 / sqrt(n).
    EXPECT_LT(d, 1.9495 / std::sqrt(static_cast<double>(n)));
}

TEST(NoncentralT, FixedSeedIsBitIdentical) {
    RngStream a(9, 3), b(9, 3);
    for (int i = 0; i < 1000; ++i) {
        EXPECT_EQ(sample_noncentral_t(12.0, 1.5, a), sample_noncentral_t(12.0, 1.5, b));
    }
}
