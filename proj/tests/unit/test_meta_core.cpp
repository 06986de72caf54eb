#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "hetcv/meta_core.hpp"
#include "test_support.hpp"

using namespace hetcv;

namespace {

MetaDataset make(std::vector<double> y, std::vector<double> v) { return MetaDataset(y, v); }

}  // namespace

TEST(MetaDataset, Validation) {
    EXPECT_THROW(make({1.0}, {1.0}), InputError);
    EXPECT_THROW(make({1.0, 2.0}, {1.0}), InputError);
    EXPECT_THROW(make({1.0, 2.0}, {1.0, 0.0}), InputError);
    EXPECT_THROW(make({1.0, 2.0}, {1.0, -1.0}), InputError);
    EXPECT_THROW(make({1.0, std::nan("")}, {1.0, 1.0}), InputError);
    EXPECT_THROW(make({1.0, 2.0}, {1.0, kInf}), InputError);
    EXPECT_EQ(make({1.0, 2.0}, {1.0, 1.0}).k(), 2);
}

TEST(PooledEstimate, KnownValues) {
    auto a = pooled_estimate(make({1, 1}, {1, 1}), 0.0);
    EXPECT_DOUBLE_EQ(a.beta_hat, 1.0);
    EXPECT_DOUBLE_EQ(a.var_beta_hat, 0.5);
    auto b = pooled_estimate(make({0, 2}, {1, 1}), 0.0);
    EXPECT_DOUBLE_EQ(b.beta_hat, 1.0);
    EXPECT_DOUBLE_EQ(b.var_beta_hat, 0.5);
    auto c = pooled_estimate(make({0, 2}, {1, 3}), 1.0);
    EXPECT_NEAR(c.beta_hat, 0.5 / 0.75, 1e-15);
    EXPECT_NEAR(c.var_beta_hat, 1.0 / 0.75, 1e-15);
    EXPECT_THROW((void)pooled_estimate(make({0, 2}, {1, 3}), -1.0), DomainError);
}

TEST(PooledEstimate, LargeTau2GivesUnweightedMean) {
    const auto d = make({0.3, 1.1, -0.4, 2.0}, {0.01, 0.5, 0.2, 1.3});
    const double mean = (0.3 + 1.1 - 0.4 + 2.0) / 4.0;
    EXPECT_NEAR(pooled_estimate(d, 1e12).beta_hat, mean, 1e-6 * std::abs(mean));
}

TEST(CochranQ, KnownValues) {
    EXPECT_EQ(cochran_q(make({1, 1}, {1, 1})), 0.0);
    EXPECT_DOUBLE_EQ(cochran_q(make({0, 2}, {1, 1})), 2.0);
}

TEST(CochranQ, AlgebraicIdentity) {
    std::mt19937_64 gen(10);
    for (int rep = 0; rep < 200; ++rep) {
        const MetaDataset d = test::random_dataset(gen);
        double swy = 0.0, swy2 = 0.0, s1 = 0.0;
        for (const auto& s : d) {
            const double w = 1.0 / s.within_var;
            s1 += w;
            swy += w * s.effect;
            swy2 += w * s.effect * s.effect;
        }
        const double alt = swy2 - swy * swy / s1;
        EXPECT_NEAR(cochran_q(d), alt, 1e-10 * std::max(1.0, alt));
    }
}

TEST(DlTau2, KnownValues) {
    const auto a = dl_tau2(make({0, 2}, {1, 1}));
    EXPECT_DOUBLE_EQ(a.tau2, 1.0);
    const auto b = dl_tau2(make({1, 1}, {1, 1}));
    EXPECT_EQ(b.tau2, 0.0);
    EXPECT_DOUBLE_EQ(b.untruncated, -1.0);
    // Q < K − 1 truncates.
    const auto c = dl_tau2(make({0.0, 0.1, 0.05}, {1, 1, 1}));
    EXPECT_EQ(c.tau2, 0.0);
    EXPECT_LT(c.untruncated, 0.0);
}

TEST(VarQ, KnownValues) {
    WeightSums ws{2.0, 2.0, 2.0};
    EXPECT_DOUBLE_EQ(var_q(ws, 10, 0.0), 18.0);
    EXPECT_DOUBLE_EQ(var_q(ws, 2, 1.0), 8.0);
    EXPECT_THROW((void)var_q(ws, 2, -1.0), DomainError);
}

TEST(VarTau2, KnownValues) {
    EXPECT_DOUBLE_EQ(var_tau2(make({0, 0}, {1, 1}), 0.0), 2.0);
    // Scaling v by c² rescales Var(T²) by c⁴ (τ² scaled by c² too).
    const auto d = make({0.1, 0.5, 0.9}, {0.2, 0.4, 0.3});
    const auto d4 = make({0.2, 1.0, 1.8}, {0.8, 1.6, 1.2});
    EXPECT_NEAR(var_tau2(d4, 4.0 * 0.7), 16.0 * var_tau2(d, 0.7), 1e-10);
}

TEST(VarQ, MatchesMonteCarlo) {
    // Oracle: the empirical variance of Q over 1e5 normal datasets.
    const std::vector<double> v{0.05, 0.1, 0.2, 0.02, 0.3, 0.08, 0.15, 0.04};
    const double tau2 = 0.09;
    std::vector<double> y(v.size());
    std::mt19937_64 gen(123);
    std::normal_distribution<double> z;
    const int reps = 100000;
    double sum = 0.0, sum2 = 0.0, st = 0.0, st2 = 0.0;
    WeightSums ws;
    for (int r = 0; r < reps; ++r) {
        for (std::size_t i = 0; i < v.size(); ++i) y[i] = 0.4 + std::sqrt(v[i] + tau2) * z(gen);
        const MetaDataset d(y, v);
        if (r == 0) ws = weight_sums(d);
        const double q = cochran_q(d);
        const double t = dl_tau2(d).untruncated;
        sum += q;
        sum2 += q * q;
        st += t;
        st2 += t * t;
    }
    const double mc_var_q = (sum2 - sum * sum / reps) / (reps - 1);
    const double mc_var_t = (st2 - st * st / reps) / (reps - 1);
    const int k = static_cast<int>(v.size());
    EXPECT_NEAR(var_q(ws, k, tau2) / mc_var_q, 1.0, 0.03);
    EXPECT_NEAR(var_tau2(ws, k, tau2) / mc_var_t, 1.0, 0.05);
}

TEST(VarTau2, MatchesMonteCarloEqualWeights) {
    const std::vector<double> v(10, 0.5);
    const double tau2 = 1.0;
    std::vector<double> y(v.size());
    std::mt19937_64 gen(321);
    std::normal_distribution<double> z;
    const int reps = 100000;
    double st = 0.0, st2 = 0.0;
    for (int r = 0; r < reps; ++r) {
        for (std::size_t i = 0; i < v.size(); ++i) y[i] = std::sqrt(v[i] + tau2) * z(gen);
        const double t = dl_tau2(MetaDataset(y, v)).untruncated;
        st += t;
        st2 += t * t;
    }
    const double mc = (st2 - st * st / reps) / (reps - 1);
    EXPECT_NEAR(var_tau2(MetaDataset(y, v), tau2) / mc, 1.0, 0.05);
}

TEST(ISquared, KnownValues) {
    EXPECT_EQ(i_squared(0.0, 5), 0.0);
    EXPECT_DOUBLE_EQ(i_squared(8.0, 5), 0.5);
    EXPECT_EQ(i_squared(2.0, 5), 0.0);
    EXPECT_THROW((void)i_squared(1.0, 1), DomainError);
}

TEST(RB, KnownValues) {
    EXPECT_EQ(r_b(make({0, 2}, {1, 3}), 0.0), 0.0);
    EXPECT_DOUBLE_EQ(r_b(make({0, 2}, {1, 3}), 1.0), 0.375);
    EXPECT_NEAR(r_b(make({0, 2}, {1e-12, 1e-12}), 1.0), 1.0, 1e-11);
}

TEST(DiamondRatio, KnownValues) {
    EXPECT_EQ(diamond_ratio(make({0, 2}, {1, 3}), 0.0), 1.0);
    EXPECT_NEAR(diamond_ratio(make({0, 2}, {1, 1}), 1.0), std::sqrt(2.0), 1e-15);
}

TEST(Invariants, RandomDatasets) {
    std::mt19937_64 gen(77);
    for (int rep = 0; rep < 500; ++rep) {
        const MetaDataset d = test::random_dataset(gen);
        const PooledFit fit = fit_random_effects(d);
        EXPECT_GE(fit.q, 0.0);
        EXPECT_GE(fit.tau2_hat, 0.0);
        const double rb = r_b(d, fit.tau2_hat);
        EXPECT_GE(rb, 0.0);
        EXPECT_LE(rb, 1.0);
        EXPECT_GE(diamond_ratio(d, fit.tau2_hat), 1.0);
        EXPECT_NEAR(fit.var_beta_hat, 1.0 / [&] {
            double s = 0.0;
            for (const auto& st : d) s += 1.0 / (st.within_var + fit.tau2_hat);
            return s;
        }(), 1e-15);
        if (fit.tau2_hat > 0.0) {
            EXPECT_NEAR(rb * d.k() * fit.var_beta_hat, fit.tau2_hat, 1e-10 * std::max(1.0, fit.tau2_hat));
        }
    }
}

TEST(Invariants, ScaleEquivariance) {
    // c = 2 keeps every rescaling exact in binary floating point.
    std::mt19937_64 gen(78);
    const double c = 2.0;
    for (int rep = 0; rep < 200; ++rep) {
        const MetaDataset d = test::random_dataset(gen);
        std::vector<double> y, v;
        for (const auto& s : d) {
            y.push_back(c * s.effect);
            v.push_back(c * c * s.within_var);
        }
        const MetaDataset ds(y, v);
        const PooledFit f = fit_random_effects(d);
        const PooledFit fs = fit_random_effects(ds);
        EXPECT_EQ(fs.beta_hat, c * f.beta_hat);
        EXPECT_EQ(fs.tau2_hat, c * c * f.tau2_hat);
        EXPECT_EQ(i_squared(fs.q, fs.k), i_squared(f.q, f.k));
        EXPECT_EQ(r_b(ds, fs.tau2_hat), r_b(d, f.tau2_hat));
        EXPECT_EQ(diamond_ratio(ds, fs.tau2_hat), diamond_ratio(d, f.tau2_hat));
    }
}

TEST(FitRandomEffects, PluggableEstimator) {
    struct Fixed {
        Tau2Estimate operator()(const MetaDataset&) const { return {0.25, 0.25}; }
    };
    const auto d = make({0, 2}, {1, 3});
    const PooledFit f = fit_random_effects(d, Fixed{});
    EXPECT_EQ(f.tau2_hat, 0.25);
    EXPECT_DOUBLE_EQ(f.beta_hat, pooled_estimate(d, 0.25).beta_hat);
    const PooledFit fe = fit_fixed_effect(d);
    EXPECT_EQ(fe.model, Model::Fixed);
    EXPECT_EQ(fe.tau2_hat, 0.0);
}
