#pragma once

// Shared fixtures and brute-force oracles for the unit and acceptance tests.

#include <array>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "hetcv/hetcv.hpp"

namespace hetcv::test {

/// Within-study variances of the 35-study incidence-rate meta-analysis.
inline const std::vector<double> kZhuVariances{
    0.009, 0.023, 0.008, 0.008, 0.007, 0.034, 0.019, 0.032, 0.022, 0.027, 0.030, 0.019,
    0.032, 0.055, 0.001, 0.016, 0.025, 0.076, 0.023, 0.013, 0.020, 0.036, 0.010, 0.007,
    0.022, 0.028, 0.023, 0.076, 0.076, 0.091, 0.008, 0.046, 0.063, 0.019, 0.011};

inline const std::vector<int> kHsspTotals{311, 63, 146, 36, 21, 109, 67, 293, 112};

struct ArmRow {
    int n1;
    double m1;
    double sd1;
    int n2;
    double m2;
    double sd2;
};

/// Stroke-unit length-of-stay trials (same rows as data/hssp.csv).
inline const std::vector<ArmRow> kHsspRows{
    {155, 55, 47, 156, 75, 64}, {31, 27, 7, 32, 29, 4},    {75, 64, 17, 71, 119, 29},
    {18, 66, 20, 18, 137, 48},  {8, 14, 8, 13, 18, 11},    {57, 19, 7, 52, 18, 4},
    {34, 52, 45, 33, 41, 34},   {110, 21, 16, 183, 31, 27}, {60, 30, 27, 52, 23, 20}};

inline std::string source_dir() { return HETCV_SOURCE_DIR; }

/// Random heterogeneous dataset: K in [kmin, kmax], v_i log-uniform, effects
/// N(beta, v_i + tau²) with beta and tau drawn per dataset.
inline MetaDataset random_dataset(std::mt19937_64& gen, int kmin = 3, int kmax = 40) {
    std::uniform_int_distribution<int> kd(kmin, kmax);
    std::uniform_real_distribution<double> logv(std::log(0.005), std::log(0.5));
    std::uniform_real_distribution<double> bd(-1.5, 1.5);
    std::uniform_real_distribution<double> td(0.0, 0.9);
    std::normal_distribution<double> z;
    const int k = kd(gen);
    const double beta = bd(gen);
    const double tau = td(gen);
    std::vector<double> y(static_cast<std::size_t>(k)), v(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        v[static_cast<std::size_t>(i)] = std::exp(logv(gen));
        y[static_cast<std::size_t>(i)] =
            beta + std::sqrt(v[static_cast<std::size_t>(i)] + tau * tau) * z(gen);
    }
    return MetaDataset(y, v);
}

/// Dataset with τ̂² > 0, redrawn until heterogeneity is detected.
inline MetaDataset random_heterogeneous_dataset(std::mt19937_64& gen, int kmin = 3,
                                                int kmax = 40) {
    for (;;) {
        MetaDataset d = random_dataset(gen, kmin, kmax);
        if (dl_tau2(d).tau2 > 0.0) return d;
    }
}

/// Dense-grid PropImp oracle: evaluates the bound objectives on n equally
/// spaced θ in [0, π/2] and returns (min lower objective, max upper objective).
inline std::pair<double, double> propimp_grid_oracle(const ComponentIntervals& comp, Measure m,
                                                     double alpha, int n = 10001) {
    const double z = two_sided_critical(alpha);
    double lo = kInf;
    double hi = -kInf;
    for (int i = 0; i < n; ++i) {
        const double th = (std::numbers::pi / 2.0) * i / (n - 1);
        lo = std::min(lo, propimp_lower_objective(comp, m, z, th));
        hi = std::max(hi, propimp_upper_objective(comp, m, z, th));
    }
    return {lo, hi};
}

}  // namespace hetcv::test
