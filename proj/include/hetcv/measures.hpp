#pragma once

// The coefficient of variation CV_B = τ/|β| and its rescalings onto [0, 1],
// M1 = τ/(τ + |β|) and M2 = τ²/(τ² + β²), with delta-method moments for the
// logit-transformed estimators.

#include <cmath>

#include "hetcv/meta_core.hpp"
#include "hetcv/numerics.hpp"

namespace hetcv {

enum class Measure { CvB, M1, M2 };

struct CvMeasure {
    double cv_b = 0.0;  ///< +inf when β = 0 and τ > 0
    double m1 = 0.0;
    double m2 = 0.0;
};

/// Convention: τ = 0 gives all-zero measures (including β = 0);
/// β = 0 with τ > 0 gives CV_B = +inf and M1 = M2 = 1.
[[nodiscard]] inline CvMeasure cv_measures(double tau, double beta) {
    if (!(tau >= 0.0)) throw DomainError("cv_measures requires tau >= 0");
    const double ab = std::abs(beta);
    if (tau == 0.0) return {};
    if (ab == 0.0) return {kInf, 1.0, 1.0};
    return {tau / ab, tau / (tau + ab), tau * tau / (tau * tau + ab * ab)};
}

/// f(τ, |β|) for a single measure, with the same conventions as cv_measures.
[[nodiscard]] inline double measure_value(Measure m, double tau, double abs_beta) {
    if (tau <= 0.0) return 0.0;
    if (abs_beta <= 0.0) return m == Measure::CvB ? kInf : 1.0;
    switch (m) {
        case Measure::CvB: return tau / abs_beta;
        case Measure::M1: return tau / (tau + abs_beta);
        case Measure::M2: return tau * tau / (tau * tau + abs_beta * abs_beta);
    }
    return 0.0;
}

[[nodiscard]] inline double select(const CvMeasure& cv, Measure m) noexcept {
    switch (m) {
        case Measure::CvB: return cv.cv_b;
        case Measure::M1: return cv.m1;
        case Measure::M2: return cv.m2;
    }
    return 0.0;
}

[[nodiscard]] inline double logit(double u) {
    if (!(u > 0.0 && u < 1.0)) throw DomainError("logit requires 0 < u < 1");
    return std::log(u / (1.0 - u));
}

[[nodiscard]] inline double inv_logit(double v) noexcept {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
}

/// CV_B ↦ M1 and M2 (the identities M1 = CV/(1+CV), M2 = CV²/(1+CV²)).
[[nodiscard]] inline double m1_from_cv(double cv) noexcept {
    return std::isinf(cv) ? 1.0 : cv / (1.0 + cv);
}
[[nodiscard]] inline double m2_from_cv(double cv) noexcept {
    return std::isinf(cv) ? 1.0 : cv * cv / (1.0 + cv * cv);
}
[[nodiscard]] inline double cv_from_m1(double m1) noexcept {
    return m1 >= 1.0 ? kInf : m1 / (1.0 - m1);
}

/// All point measures of heterogeneity for one fit.
struct HetMeasures {
    double i2 = 0.0;
    double dr = 1.0;
    double rb = 0.0;
    double cv_b = 0.0;
    double m1 = 0.0;
    double m2 = 0.0;
    friend bool operator==(const HetMeasures&, const HetMeasures&) = default;
};

[[nodiscard]] inline HetMeasures het_measures(const MetaDataset& data, const PooledFit& fit) {
    const CvMeasure cv = cv_measures(fit.tau_hat(), fit.beta_hat);
    return {i_squared(fit.q, fit.k), diamond_ratio(data, fit.tau2_hat), r_b(data, fit.tau2_hat),
            cv.cv_b, cv.m1, cv.m2};
}

/// Delta-method variance and bias of logit(M̂1) and logit(M̂2).
struct LogitMoments {
    double var_logit_m1 = 0.0;
    double bias_logit_m1 = 0.0;
    double var_logit_m2 = 0.0;
    double bias_logit_m2 = 0.0;
};

/// Moments from plug-in variances:
///   Var[logit M̂1]  ≈ Var(τ̂²)/(4τ⁴) + Var(β̂)/β²
///   bias[logit M̂1] ≈ ½[Var(β̂)/β² − Var(τ̂²)/(2τ⁴)]
/// with the M2 entries scaled by 4 and 2.
[[nodiscard]] inline LogitMoments logit_m1_moments(double tau2, double beta, double var_tau2_hat,
                                                   double var_beta_hat) {
    if (!(tau2 > 0.0) || beta == 0.0) {
        throw DomainError("logit moments undefined for tau2 = 0 or beta = 0");
    }
    const double tau_term = var_tau2_hat / (tau2 * tau2);
    const double beta_term = var_beta_hat / (beta * beta);
    LogitMoments m;
    m.var_logit_m1 = tau_term / 4.0 + beta_term;
    m.bias_logit_m1 = 0.5 * (beta_term - tau_term / 2.0);
    m.var_logit_m2 = 4.0 * m.var_logit_m1;
    m.bias_logit_m2 = 2.0 * m.bias_logit_m1;
    return m;
}

[[nodiscard]] inline LogitMoments logit_m1_moments(const PooledFit& fit) {
    return logit_m1_moments(fit.tau2_hat, fit.beta_hat, fit.var_tau2_hat, fit.var_beta_hat);
}

struct SmallVarianceMoments {
    double var = 0.0;
    double bias = 0.0;
};

/// Diagnostic approximations for v_i ≪ τ², evaluated exactly as
///   var  = ½(S2 − 2S3/S1 + S2²/S1²) + (1/K)(τ²/β²)
///   bias = ½[(1/K)(τ²/β²) − (S2 − 2S3/S1 + S2²/S1²)].
/// Not used by any interval construction.
[[nodiscard]] inline SmallVarianceMoments small_v_moments(const WeightSums& ws, int k, double tau,
                                                          double beta) {
    if (beta == 0.0) throw DomainError("small_v_moments requires beta != 0");
    const double weight_term = ws.s2 - 2.0 * ws.s3 / ws.s1 + ws.s2 * ws.s2 / (ws.s1 * ws.s1);
    const double cv_term = (tau * tau) / (beta * beta) / k;
    return {0.5 * weight_term + cv_term, 0.5 * (cv_term - weight_term)};
}

}  // namespace hetcv
