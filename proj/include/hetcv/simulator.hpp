#pragma once

// Monte Carlo engine: synthetic meta-analyses (standardised mean differences
// through a scaled noncentral t, or normal effects with fixed within-study
// variances), interval coverage / width tables, and measure summaries.
//
// Replicate r of a scenario always draws from RngStream(seed, r), and the
// per-replicate outcomes are reduced in replicate order, so results are
// identical for any number of worker threads.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "hetcv/intervals.hpp"
#include "hetcv/measures.hpp"
#include "hetcv/meta_core.hpp"
#include "hetcv/numerics.hpp"

namespace hetcv {

struct ArmSizes {
    int n1 = 0;
    int n2 = 0;
    friend bool operator==(const ArmSizes&, const ArmSizes&) = default;
};

/// Splits a total sample size into two arms, larger arm first.
[[nodiscard]] inline ArmSizes split_arms(int total) {
    return {(total + 1) / 2, total / 2};
}

struct Scenario {
    std::string name;
    double beta = 0.0;
    double tau = 0.0;
    /// Exactly one of these is non-empty: arm sizes select SMD generation,
    /// within-study variances select normal generation.
    std::vector<ArmSizes> arm_sizes;
    std::vector<double> within_vars;
    int reps = 2000;
    std::vector<Method> methods{Method::AlphaAdjusted, Method::PropImp, Method::Wald};
    double alpha = 0.05;
    std::uint64_t seed = 1;

    [[nodiscard]] bool smd_mode() const noexcept { return !arm_sizes.empty(); }
    [[nodiscard]] int k() const noexcept {
        return static_cast<int>(smd_mode() ? arm_sizes.size() : within_vars.size());
    }

    void validate() const {
        if (arm_sizes.empty() == within_vars.empty()) {
            throw InputError("scenario '" + name +
                             "': exactly one of arm_sizes / within_vars must be given");
        }
        if (k() < 2) throw InputError("scenario '" + name + "': at least two studies required");
        if (reps < 1) throw InputError("scenario '" + name + "': reps must be >= 1");
        if (!(tau >= 0.0) || !std::isfinite(tau)) {
            throw InputError("scenario '" + name + "': tau must be finite and >= 0");
        }
        if (!std::isfinite(beta)) throw InputError("scenario '" + name + "': beta must be finite");
        if (!(alpha > 0.0 && alpha < 1.0)) {
            throw InputError("scenario '" + name + "': alpha must lie in (0, 1)");
        }
        for (const auto& a : arm_sizes) {
            if (a.n1 < 1 || a.n2 < 1 || a.n1 + a.n2 <= 2) {
                throw InputError("scenario '" + name + "': arm sizes must give n1 + n2 > 2");
            }
        }
        for (double v : within_vars) {
            if (!(v > 0.0) || !std::isfinite(v)) {
                throw InputError("scenario '" + name + "': within_vars must be positive");
            }
        }
    }
};

/// Large-sample variance of a standardised mean difference d:
/// 1/n1 + 1/n2 + d² / (2(n1 + n2)).
[[nodiscard]] inline double smd_variance(double d, int n1, int n2) noexcept {
    return 1.0 / n1 + 1.0 / n2 + d * d / (2.0 * (n1 + n2));
}

/// Per study: θ_i = β + γ_i with γ_i ~ N(0, τ²); t ~ nct(n1 + n2 − 2, θ_i / m)
/// with m = sqrt(1/n1 + 1/n2); Y_i = t·m and v_i = smd_variance(Y_i).
[[nodiscard]] inline MetaDataset generate_smd_dataset(const Scenario& sc, RngStream& rng) {
    std::vector<StudyRecord> studies;
    studies.reserve(sc.arm_sizes.size());
    for (const auto& [n1, n2] : sc.arm_sizes) {
        if (n1 + n2 <= 2) throw InputError("SMD generation requires n1 + n2 > 2");
        const double theta = sc.beta + sc.tau * rng.normal();
        const double m = std::sqrt(1.0 / n1 + 1.0 / n2);
        const double df = n1 + n2 - 2;
        const double y = sample_noncentral_t(df, theta / m, rng) * m;
        studies.push_back({y, smd_variance(y, n1, n2), {}});
    }
    return MetaDataset(std::move(studies));
}

/// Y_i ~ N(β + γ_i, v_i) with γ_i ~ N(0, τ²) and v_i fixed.
[[nodiscard]] inline MetaDataset generate_normal_dataset(const Scenario& sc, RngStream& rng) {
    std::vector<StudyRecord> studies;
    studies.reserve(sc.within_vars.size());
    for (double v : sc.within_vars) {
        const double theta = sc.beta + sc.tau * rng.normal();
        studies.push_back({theta + std::sqrt(v) * rng.normal(), v, {}});
    }
    return MetaDataset(std::move(studies));
}

[[nodiscard]] inline MetaDataset generate_dataset(const Scenario& sc, RngStream& rng) {
    return sc.smd_mode() ? generate_smd_dataset(sc, rng) : generate_normal_dataset(sc, rng);
}

// ---------------------------------------------------------------------------
// Parallel replicate loop
// ---------------------------------------------------------------------------

/// Calls body(r) for r in [0, n) on up to `threads` workers (contiguous
/// blocks). The first exception thrown by any worker is rethrown.
template <class Body>
void parallel_for(int n, int threads, Body&& body) {
    threads = std::clamp(threads, 1, std::max(1, n));
    if (threads == 1) {
        for (int r = 0; r < n; ++r) body(r);
        return;
    }
    std::exception_ptr error;
    std::mutex error_mutex;
    {
        std::vector<std::jthread> pool;
        pool.reserve(static_cast<std::size_t>(threads));
        for (int t = 0; t < threads; ++t) {
            const int begin = static_cast<int>(static_cast<long long>(n) * t / threads);
            const int end = static_cast<int>(static_cast<long long>(n) * (t + 1) / threads);
            pool.emplace_back([&, begin, end] {
                try {
                    for (int r = begin; r < end; ++r) body(r);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            });
        }
    }
    if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// Coverage study
// ---------------------------------------------------------------------------

struct WidthSummary {
    double mean = 0.0;
    double median = 0.0;
    /// When set the mean is infinite and the median is the usable summary.
    bool any_infinite = false;
};

struct MethodCoverage {
    Method method = Method::PropImp;
    int covered = 0;
    int reps = 0;
    double coverage = 0.0;
    std::array<WidthSummary, 3> widths{};  ///< indexed like kAllMeasures
    /// Replicates where the three measures disagreed on containment (0 expected).
    int measure_disagreements = 0;
};

struct CoverageResult {
    Scenario scenario;
    std::vector<MethodCoverage> methods;
    int truncated = 0;
    double truncation_rate = 0.0;
};

/// Median with linear interpolation between order statistics.
[[nodiscard]] inline double quantile_type7(std::vector<double> values, double p) {
    if (values.empty()) throw DomainError("quantile of empty sample");
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = h - static_cast<double>(lo);
    if (frac == 0.0 || values[lo] == values[hi]) return values[lo];
    return values[lo] + frac * (values[hi] - values[lo]);
}

[[nodiscard]] inline WidthSummary summarize_widths(const std::vector<double>& widths) {
    WidthSummary s;
    double sum = 0.0;
    for (double w : widths) {
        if (std::isinf(w)) s.any_infinite = true;
        sum += w;
    }
    s.mean = s.any_infinite ? kInf : sum / static_cast<double>(widths.size());
    s.median = quantile_type7(widths, 0.5);
    return s;
}

namespace detail {

struct RepMethodOutcome {
    std::array<bool, 3> covered{};
    std::array<double, 3> width{};
};

inline std::array<IntervalEstimate, 3> method_intervals(const ComponentIntervals& comp,
                                                        Method method, Probability alpha) {
    if (method == Method::PropImp) return propimp_all_measures(comp, alpha);
    std::array<IntervalEstimate, 3> out;
    for (std::size_t i = 0; i < kAllMeasures.size(); ++i) {
        out[i] = measure_interval(comp, kAllMeasures[i], method, alpha);
    }
    return out;
}

}  // namespace detail

/// Runs the coverage study: per replicate, generate data, fit the
/// random-effects model (DerSimonian–Laird), build each requested interval
/// and record whether it contains the true measure computed from (β, τ).
/// Replicates with τ̂ = 0 receive maximal intervals, which cover any truth
/// inside the measure's range.
[[nodiscard]] inline CoverageResult run_scenario(const Scenario& sc, int threads = 1) {
    sc.validate();
    const Probability alpha(sc.alpha);
    const CvMeasure truth = cv_measures(sc.tau, sc.beta);
    const std::size_t n_methods = sc.methods.size();
    const auto reps = static_cast<std::size_t>(sc.reps);

    std::vector<detail::RepMethodOutcome> outcomes(reps * n_methods);
    std::vector<char> truncated(reps, 0);

    parallel_for(sc.reps, threads, [&](int r) {
        RngStream rng(sc.seed, static_cast<std::uint64_t>(r));
        const MetaDataset data = generate_dataset(sc, rng);
        const PooledFit fit = fit_random_effects(data);
        truncated[static_cast<std::size_t>(r)] = fit.tau2_hat > 0.0 ? 0 : 1;
        const ComponentIntervals comp(data, fit);
        for (std::size_t j = 0; j < n_methods; ++j) {
            const auto cis = detail::method_intervals(comp, sc.methods[j], alpha);
            auto& out = outcomes[static_cast<std::size_t>(r) * n_methods + j];
            for (std::size_t i = 0; i < 3; ++i) {
                out.covered[i] = cis[i].contains(select(truth, kAllMeasures[i]));
                out.width[i] = cis[i].width();
            }
        }
    });

    CoverageResult result;
    result.scenario = sc;
    for (char t : truncated) result.truncated += t;
    result.truncation_rate = static_cast<double>(result.truncated) / static_cast<double>(reps);

    std::vector<double> widths(reps);
    for (std::size_t j = 0; j < n_methods; ++j) {
        MethodCoverage mc;
        mc.method = sc.methods[j];
        mc.reps = sc.reps;
        for (std::size_t r = 0; r < reps; ++r) {
            const auto& o = outcomes[r * n_methods + j];
            // M1 is the reference event for coverage.
            if (o.covered[1]) ++mc.covered;
            if (o.covered[0] != o.covered[1] || o.covered[2] != o.covered[1]) {
                ++mc.measure_disagreements;
            }
        }
        mc.coverage = static_cast<double>(mc.covered) / static_cast<double>(reps);
        for (std::size_t i = 0; i < 3; ++i) {
            for (std::size_t r = 0; r < reps; ++r) widths[r] = outcomes[r * n_methods + j].width[i];
            mc.widths[i] = summarize_widths(widths);
        }
        result.methods.push_back(mc);
    }
    return result;
}

// ---------------------------------------------------------------------------
// Measure summaries
// ---------------------------------------------------------------------------

struct FiveNumber {
    double min = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double max = 0.0;
};

[[nodiscard]] inline FiveNumber five_number(const std::vector<double>& values) {
    return {*std::min_element(values.begin(), values.end()), quantile_type7(values, 0.25),
            quantile_type7(values, 0.5), quantile_type7(values, 0.75),
            *std::max_element(values.begin(), values.end())};
}

struct MeasureSummary {
    FiveNumber i2;
    FiveNumber cv_b;
    FiveNumber m1;
    FiveNumber m2;
};

/// Five-number summaries of the estimated I², CV_B, M1 and M2 over the
/// scenario's replicates (quartiles by linear interpolation).
[[nodiscard]] inline MeasureSummary measure_summary(const Scenario& sc, int threads = 1) {
    sc.validate();
    const auto reps = static_cast<std::size_t>(sc.reps);
    std::vector<double> i2(reps), cv(reps), m1(reps), m2(reps);
    parallel_for(sc.reps, threads, [&](int r) {
        RngStream rng(sc.seed, static_cast<std::uint64_t>(r));
        const MetaDataset data = generate_dataset(sc, rng);
        const PooledFit fit = fit_random_effects(data);
        const auto idx = static_cast<std::size_t>(r);
        const CvMeasure est = cv_measures(fit.tau_hat(), fit.beta_hat);
        i2[idx] = i_squared(fit.q, fit.k);
        cv[idx] = est.cv_b;
        m1[idx] = est.m1;
        m2[idx] = est.m2;
    });
    return {five_number(i2), five_number(cv), five_number(m1), five_number(m2)};
}

}  // namespace hetcv
