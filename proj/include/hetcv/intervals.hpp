#pragma once

// Confidence intervals for τ², β, |β|, β² and for the CV_B / M1 / M2
// heterogeneity measures.
//
// Measure intervals come from one of three constructions:
//   * Wald on the logit scale, using the delta-method variance of logit(M̂1);
//   * substitution of component interval bounds for (τ, |β|) into the
//     measure (fixed-parameter, both-95%, and α-adjusted variants);
//   * PropImp, which optimises the substitution over how the overall
//     critical value z is split between the two components
//     (z sin θ for τ, z cos θ for β, 0 ≤ θ ≤ π/2).
//
// Every measure is increasing in τ and decreasing in |β|, so a lower bound
// pairs the τ lower bound with the |β| upper bound and vice versa.

#include <array>
#include <cmath>
#include <numbers>
#include <string_view>
#include <utility>
#include <vector>

#include "hetcv/measures.hpp"
#include "hetcv/meta_core.hpp"
#include "hetcv/numerics.hpp"

namespace hetcv {

enum class Quantity { CvB, M1, M2, Tau2, Tau, Beta, AbsBeta, BetaSq };

enum class Method { Wald, FixedTau, FixedBeta, Both, AlphaAdjusted, PropImp, QProfile };

[[nodiscard]] constexpr Quantity quantity_of(Measure m) noexcept {
    switch (m) {
        case Measure::CvB: return Quantity::CvB;
        case Measure::M1: return Quantity::M1;
        case Measure::M2: return Quantity::M2;
    }
    return Quantity::M1;
}

[[nodiscard]] constexpr std::string_view to_string(Quantity q) noexcept {
    switch (q) {
        case Quantity::CvB: return "CV_B";
        case Quantity::M1: return "M1";
        case Quantity::M2: return "M2";
        case Quantity::Tau2: return "TAU2";
        case Quantity::Tau: return "TAU";
        case Quantity::Beta: return "BETA";
        case Quantity::AbsBeta: return "ABS_BETA";
        case Quantity::BetaSq: return "BETA_SQ";
    }
    return "?";
}

[[nodiscard]] constexpr std::string_view to_string(Method m) noexcept {
    switch (m) {
        case Method::Wald: return "wald";
        case Method::FixedTau: return "fixed-tau";
        case Method::FixedBeta: return "fixed-beta";
        case Method::Both: return "both";
        case Method::AlphaAdjusted: return "alpha-adj";
        case Method::PropImp: return "propimp";
        case Method::QProfile: return "qprofile";
    }
    return "?";
}

inline constexpr std::array<Measure, 3> kAllMeasures{Measure::CvB, Measure::M1, Measure::M2};

struct IntervalEstimate {
    double lower = 0.0;
    double upper = 0.0;  ///< may be +inf
    Quantity quantity = Quantity::M1;
    Method method = Method::Wald;
    /// Component levels: the τ interval has coverage 1 − alpha_tau and the β
    /// interval 1 − alpha_beta. A level of 1 means the parameter is fixed at
    /// its point estimate.
    Probability alpha_tau{0.05};
    Probability alpha_beta{0.05};
    /// Set when τ̂ = 0 (or β̂ = 0 for Wald) forced the maximal interval.
    bool degenerate = false;

    [[nodiscard]] bool contains(double x) const noexcept { return lower <= x && x <= upper; }
    [[nodiscard]] double width() const noexcept { return upper - lower; }
    [[nodiscard]] bool upper_infinite() const noexcept { return std::isinf(upper); }
    friend bool operator==(const IntervalEstimate&, const IntervalEstimate&) = default;
};

/// [0, 1] for M1/M2 and [0, ∞) for CV_B.
[[nodiscard]] inline IntervalEstimate maximal_interval(Measure m, Method method, double alpha) {
    IntervalEstimate ci;
    ci.lower = 0.0;
    ci.upper = m == Measure::CvB ? kInf : 1.0;
    ci.quantity = quantity_of(m);
    ci.method = method;
    ci.alpha_tau = Probability(alpha);
    ci.alpha_beta = Probability(alpha);
    ci.degenerate = true;
    return ci;
}

// ---------------------------------------------------------------------------
// Q-profile interval for τ²
// ---------------------------------------------------------------------------

/// Generalised Q statistic Σ (Y_i − β̂(τ²))² / (v_i + τ²); decreasing in τ².
[[nodiscard]] inline double q_gen(const MetaDataset& data, double tau2) {
    const double beta = pooled_estimate(data, tau2).beta_hat;
    double q = 0.0;
    for (const auto& s : data) {
        const double d = s.effect - beta;
        q += d * d / (s.within_var + tau2);
    }
    return q;
}

namespace detail {

/// Smallest τ² ≥ 0 with Q_gen(τ²) = target, or 0 when Q_gen(0) ≤ target.
inline double qprofile_root(const MetaDataset& data, double target, double q_at_zero,
                            double start_hi) {
    if (q_at_zero <= target) return 0.0;
    auto f = [&](double t2) { return q_gen(data, t2) - target; };
    double hi = start_hi;
    double lo = 0.0;
    double f_hi = f(hi);
    while (f_hi > 0.0) {
        lo = hi;
        hi *= 2.0;
        if (!std::isfinite(hi)) throw NumericError("Q-profile: failed to bracket root");
        f_hi = f(hi);
    }
    return find_root(f, lo, hi, 0.0);
}

inline double qprofile_start(const MetaDataset& data) {
    double mean_v = 0.0;
    for (const auto& s : data) mean_v += s.within_var;
    mean_v /= static_cast<double>(data.size());
    return std::max(mean_v, 2.0 * std::max(0.0, dl_tau2(data).untruncated));
}

}  // namespace detail

/// Q-profile (1 − α) interval for τ²: the lower bound solves
/// Q_gen(τ²) = χ²_{1−α/2, K−1}, the upper bound Q_gen(τ²) = χ²_{α/2, K−1};
/// each is 0 when Q_gen(0) is already below its target.
[[nodiscard]] inline IntervalEstimate tau2_ci_qprofile(const MetaDataset& data, Probability alpha) {
    const double a = alpha.value();
    if (!(a > 0.0 && a < 1.0)) throw DomainError("tau2_ci_qprofile requires 0 < alpha < 1");
    const int df = data.k() - 1;
    const double q0 = q_gen(data, 0.0);
    const double start = detail::qprofile_start(data);
    IntervalEstimate ci;
    ci.lower = detail::qprofile_root(data, chisq_quantile(1.0 - a / 2.0, df), q0, start);
    ci.upper = detail::qprofile_root(data, chisq_quantile(a / 2.0, df), q0, start);
    ci.quantity = Quantity::Tau2;
    ci.method = Method::QProfile;
    ci.alpha_tau = alpha;
    ci.alpha_beta = Probability(1.0);
    return ci;
}

// ---------------------------------------------------------------------------
// Intervals for β, |β| and β²
// ---------------------------------------------------------------------------

/// Wald interval β̂ ± z(α)·sqrt(Var̂(β̂)).
[[nodiscard]] inline IntervalEstimate beta_ci(const PooledFit& fit, Probability alpha) {
    const double half = alpha.value() >= 1.0
                            ? 0.0
                            : two_sided_critical(alpha.value()) * std::sqrt(fit.var_beta_hat);
    IntervalEstimate ci;
    ci.lower = fit.beta_hat - half;
    ci.upper = fit.beta_hat + half;
    ci.quantity = Quantity::Beta;
    ci.method = Method::Wald;
    ci.alpha_tau = Probability(1.0);
    ci.alpha_beta = alpha;
    return ci;
}

namespace detail {

/// |β| bounds from β bounds: same-sign intervals map bound-by-bound, an
/// interval straddling zero becomes [0, max(|L|, |U|)]. A zero bound takes
/// the sign of the other bound.
inline std::pair<double, double> abs_bounds(double lo, double hi) noexcept {
    if (lo >= 0.0) return {lo, hi};
    if (hi <= 0.0) return {-hi, -lo};
    return {0.0, std::max(-lo, hi)};
}

}  // namespace detail

[[nodiscard]] inline IntervalEstimate abs_beta_ci(const IntervalEstimate& beta_interval) {
    IntervalEstimate ci = beta_interval;
    std::tie(ci.lower, ci.upper) = detail::abs_bounds(beta_interval.lower, beta_interval.upper);
    ci.quantity = Quantity::AbsBeta;
    return ci;
}

[[nodiscard]] inline IntervalEstimate beta_sq_ci(const IntervalEstimate& beta_interval) {
    IntervalEstimate ci = abs_beta_ci(beta_interval);
    ci.lower *= ci.lower;
    ci.upper *= ci.upper;
    ci.quantity = Quantity::BetaSq;
    return ci;
}

// ---------------------------------------------------------------------------
// Wald interval on the logit scale
// ---------------------------------------------------------------------------

/// logit(M̂1) ± z·sd, back-transformed: inverse logit for M1, exp for CV_B,
/// and inverse logit of twice the bounds for M2 (logit M2 = 2 log CV_B).
[[nodiscard]] inline IntervalEstimate wald_logit_interval(const PooledFit& fit, Measure m,
                                                          Probability alpha) {
    if (!(fit.tau2_hat > 0.0) || fit.beta_hat == 0.0) {
        return maximal_interval(m, Method::Wald, alpha.value());
    }
    const LogitMoments mom = logit_m1_moments(fit);
    const double centre = std::log(fit.tau_hat() / std::abs(fit.beta_hat));
    const double half = two_sided_critical(alpha.value()) * std::sqrt(mom.var_logit_m1);
    const double lo = centre - half;
    const double hi = centre + half;
    IntervalEstimate ci;
    ci.quantity = quantity_of(m);
    ci.method = Method::Wald;
    ci.alpha_tau = alpha;
    ci.alpha_beta = alpha;
    switch (m) {
        case Measure::CvB:
            ci.lower = std::exp(lo);
            ci.upper = std::exp(hi);
            break;
        case Measure::M1:
            ci.lower = inv_logit(lo);
            ci.upper = inv_logit(hi);
            break;
        case Measure::M2:
            ci.lower = inv_logit(2.0 * lo);
            ci.upper = inv_logit(2.0 * hi);
            break;
    }
    return ci;
}

// ---------------------------------------------------------------------------
// Component intervals at arbitrary critical values
// ---------------------------------------------------------------------------

/// Generates τ and |β| interval bounds at any two-sided critical value c.
/// The τ interval is the square root of the Q-profile τ² interval at level
/// α = 2(1 − Φ(c)); the β interval is the Wald interval at the same level.
/// c = 0 pins the parameter to its point estimate.
class ComponentIntervals {
public:
    ComponentIntervals(const MetaDataset& data, const PooledFit& fit)
        : data_(&data),
          fit_(fit),
          q_at_zero_(q_gen(data, 0.0)),
          start_hi_(detail::qprofile_start(data)),
          se_beta_(std::sqrt(fit.var_beta_hat)) {}

    [[nodiscard]] const PooledFit& fit() const noexcept { return fit_; }
    [[nodiscard]] const MetaDataset& data() const noexcept { return *data_; }

    [[nodiscard]] double tau_lower(double c) const {
        if (c <= 0.0) return fit_.tau_hat();
        const double target = chisq_quantile(1.0 - two_sided_alpha(c) / 2.0, fit_.k - 1);
        return std::sqrt(detail::qprofile_root(*data_, target, q_at_zero_, start_hi_));
    }

    [[nodiscard]] double tau_upper(double c) const {
        if (c <= 0.0) return fit_.tau_hat();
        const double target = chisq_quantile(two_sided_alpha(c) / 2.0, fit_.k - 1);
        return std::sqrt(detail::qprofile_root(*data_, target, q_at_zero_, start_hi_));
    }

    [[nodiscard]] std::pair<double, double> abs_beta(double c) const noexcept {
        const double half = c <= 0.0 ? 0.0 : c * se_beta_;
        return detail::abs_bounds(fit_.beta_hat - half, fit_.beta_hat + half);
    }

    [[nodiscard]] double abs_beta_lower(double c) const noexcept { return abs_beta(c).first; }
    [[nodiscard]] double abs_beta_upper(double c) const noexcept { return abs_beta(c).second; }

private:
    const MetaDataset* data_;
    PooledFit fit_;
    double q_at_zero_;
    double start_hi_;
    double se_beta_;
};

/// Critical value for a two-sided level; α = 1 maps to 0 (parameter fixed).
[[nodiscard]] inline double critical_for(Probability alpha) {
    return alpha.value() >= 1.0 ? 0.0 : two_sided_critical(alpha.value());
}

/// Substitutes component bounds into the measure:
/// [f(L_τ, U_|β|), f(U_τ, L_|β|)].
[[nodiscard]] inline IntervalEstimate substitution_interval(const ComponentIntervals& comp,
                                                            Measure m, Probability alpha_tau,
                                                            Probability alpha_beta, Method method) {
    if (!(comp.fit().tau2_hat > 0.0)) {
        IntervalEstimate ci = maximal_interval(m, method, alpha_tau.value());
        ci.alpha_beta = alpha_beta;
        return ci;
    }
    const double c_tau = critical_for(alpha_tau);
    const double c_beta = critical_for(alpha_beta);
    const auto [b_lo, b_hi] = comp.abs_beta(c_beta);
    IntervalEstimate ci;
    ci.lower = measure_value(m, comp.tau_lower(c_tau), b_hi);
    ci.upper = measure_value(m, comp.tau_upper(c_tau), b_lo);
    ci.quantity = quantity_of(m);
    ci.method = method;
    ci.alpha_tau = alpha_tau;
    ci.alpha_beta = alpha_beta;
    return ci;
}

enum class FixMode { FixBeta, FixTau, Both };

/// Fixed-parameter and simultaneous combinations at level α:
/// FixTau is CI(0, 1−α), FixBeta is CI(1−α, 0), Both is CI(1−α, 1−α).
[[nodiscard]] inline IntervalEstimate combine_fixed(const ComponentIntervals& comp, Measure m,
                                                    FixMode mode, Probability alpha) {
    const Probability fixed(1.0);
    switch (mode) {
        case FixMode::FixTau:
            return substitution_interval(comp, m, fixed, alpha, Method::FixedTau);
        case FixMode::FixBeta:
            return substitution_interval(comp, m, alpha, fixed, Method::FixedBeta);
        case FixMode::Both:
            break;
    }
    return substitution_interval(comp, m, alpha, alpha, Method::Both);
}

/// Component level used by the α-adjusted interval: each component's
/// critical value is z(α)/√2, so α = 0.05 gives 0.1658 (83.42% coverage).
[[nodiscard]] inline double adjusted_alpha(double alpha) {
    return two_sided_alpha(two_sided_critical(alpha) / std::numbers::sqrt2);
}

[[nodiscard]] inline IntervalEstimate alpha_adjusted_interval(const ComponentIntervals& comp,
                                                              Measure m, Probability alpha) {
    const Probability adj(adjusted_alpha(alpha.value()));
    return substitution_interval(comp, m, adj, adj, Method::AlphaAdjusted);
}

// ---------------------------------------------------------------------------
// PropImp
// ---------------------------------------------------------------------------

struct PropImpTrace {
    double theta_lower = 0.0;
    double theta_upper = 0.0;
    int evaluations = 0;
    /// (τ, |β|) corners at the optimal angles.
    double tau_at_lower = 0.0;
    double abs_beta_at_lower = 0.0;
    double tau_at_upper = 0.0;
    double abs_beta_at_upper = 0.0;
};

struct PropImpResult {
    IntervalEstimate interval;
    PropImpTrace trace;
};

struct PropImpOptions {
    int grid_points = 129;
    double theta_tol = 1e-10;
};

/// Objective for the lower bound at angle θ: f(L_τ(z sin θ), U_|β|(z cos θ)).
[[nodiscard]] inline double propimp_lower_objective(const ComponentIntervals& comp, Measure m,
                                                    double z, double theta) {
    return measure_value(m, comp.tau_lower(z * std::sin(theta)),
                         comp.abs_beta_upper(z * std::cos(theta)));
}

/// Objective for the upper bound at angle θ: f(U_τ(z sin θ), L_|β|(z cos θ)).
[[nodiscard]] inline double propimp_upper_objective(const ComponentIntervals& comp, Measure m,
                                                    double z, double theta) {
    return measure_value(m, comp.tau_upper(z * std::sin(theta)),
                         comp.abs_beta_lower(z * std::cos(theta)));
}

/// L = min_θ f(L_τ(z sin θ), U_|β|(z cos θ)), U = max_θ f(U_τ(z sin θ), L_|β|(z cos θ))
/// over θ ∈ [0, π/2].
[[nodiscard]] inline PropImpResult propimp_interval(const ComponentIntervals& comp, Measure m,
                                                    Probability alpha,
                                                    const PropImpOptions& opts = {}) {
    PropImpResult out;
    if (!(comp.fit().tau2_hat > 0.0)) {
        out.interval = maximal_interval(m, Method::PropImp, alpha.value());
        return out;
    }
    const double z = two_sided_critical(alpha.value());
    constexpr double half_pi = std::numbers::pi / 2.0;

    const OptimizeResult lo = optimize_1d(
        [&](double th) { return propimp_lower_objective(comp, m, z, th); }, 0.0, half_pi,
        OptimizeMode::Minimize, opts.theta_tol, opts.grid_points);
    const OptimizeResult hi = optimize_1d(
        [&](double th) { return propimp_upper_objective(comp, m, z, th); }, 0.0, half_pi,
        OptimizeMode::Maximize, opts.theta_tol, opts.grid_points);

    out.interval.lower = lo.value;
    out.interval.upper = hi.value;
    out.interval.quantity = quantity_of(m);
    out.interval.method = Method::PropImp;
    out.interval.alpha_tau = alpha;
    out.interval.alpha_beta = alpha;

    out.trace.theta_lower = lo.argopt;
    out.trace.theta_upper = hi.argopt;
    out.trace.evaluations = lo.evaluations + hi.evaluations;
    out.trace.tau_at_lower = comp.tau_lower(z * std::sin(lo.argopt));
    out.trace.abs_beta_at_lower = comp.abs_beta_upper(z * std::cos(lo.argopt));
    out.trace.tau_at_upper = comp.tau_upper(z * std::sin(hi.argopt));
    out.trace.abs_beta_at_upper = comp.abs_beta_lower(z * std::cos(hi.argopt));
    return out;
}

/// PropImp intervals for all three measures from one optimisation. The
/// measures are increasing transforms of one another, so the optimal angles
/// coincide and each measure is evaluated at the same (τ, |β|) corners.
[[nodiscard]] inline std::array<IntervalEstimate, 3> propimp_all_measures(
    const ComponentIntervals& comp, Probability alpha, const PropImpOptions& opts = {}) {
    std::array<IntervalEstimate, 3> out;
    const PropImpResult base = propimp_interval(comp, Measure::M1, alpha, opts);
    for (std::size_t i = 0; i < kAllMeasures.size(); ++i) {
        const Measure m = kAllMeasures[i];
        if (base.interval.degenerate) {
            out[i] = maximal_interval(m, Method::PropImp, alpha.value());
            continue;
        }
        out[i] = base.interval;
        out[i].quantity = quantity_of(m);
        out[i].lower = measure_value(m, base.trace.tau_at_lower, base.trace.abs_beta_at_lower);
        out[i].upper = measure_value(m, base.trace.tau_at_upper, base.trace.abs_beta_at_upper);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Convenience entry point
// ---------------------------------------------------------------------------

/// Interval for one measure by one method at overall level α.
[[nodiscard]] inline IntervalEstimate measure_interval(const ComponentIntervals& comp, Measure m,
                                                       Method method, Probability alpha) {
    switch (method) {
        case Method::Wald: return wald_logit_interval(comp.fit(), m, alpha);
        case Method::FixedTau: return combine_fixed(comp, m, FixMode::FixTau, alpha);
        case Method::FixedBeta: return combine_fixed(comp, m, FixMode::FixBeta, alpha);
        case Method::Both: return combine_fixed(comp, m, FixMode::Both, alpha);
        case Method::AlphaAdjusted: return alpha_adjusted_interval(comp, m, alpha);
        case Method::PropImp: return propimp_interval(comp, m, alpha).interval;
        case Method::QProfile: break;
    }
    throw DomainError("qprofile is not a measure interval method");
}

}  // namespace hetcv
