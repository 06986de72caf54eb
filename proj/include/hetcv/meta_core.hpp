#pragma once

// Study-level data model, inverse-variance pooling, Cochran's Q, the
// DerSimonian–Laird between-study variance and the sample-size dependent
// comparison measures (I², diamond ratio, R_b).

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hetcv/numerics.hpp"

namespace hetcv {

/// Malformed or insufficient input data.
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct StudyRecord {
    double effect = 0.0;      ///< observed effect Y_i
    double within_var = 1.0;  ///< within-study variance v_i
    std::string label;
};

/// Ordered collection of at least two studies with finite effects and
/// positive, finite within-study variances.
class MetaDataset {
public:
    MetaDataset() = default;

    explicit MetaDataset(std::vector<StudyRecord> studies) : studies_(std::move(studies)) {
        validate();
    }

    MetaDataset(std::span<const double> effects, std::span<const double> within_vars) {
        if (effects.size() != within_vars.size()) {
            throw InputError("effects and within-study variances differ in length");
        }
        studies_.reserve(effects.size());
        for (std::size_t i = 0; i < effects.size(); ++i) {
            studies_.push_back({effects[i], within_vars[i], {}});
        }
        validate();
    }

    [[nodiscard]] std::size_t size() const noexcept { return studies_.size(); }
    [[nodiscard]] int k() const noexcept { return static_cast<int>(studies_.size()); }
    [[nodiscard]] const StudyRecord& operator[](std::size_t i) const { return studies_[i]; }
    [[nodiscard]] const std::vector<StudyRecord>& studies() const noexcept { return studies_; }
    [[nodiscard]] auto begin() const noexcept { return studies_.begin(); }
    [[nodiscard]] auto end() const noexcept { return studies_.end(); }

private:
    void validate() const {
        if (studies_.size() < 2) {
            throw InputError("at least two studies are required, got " +
                             std::to_string(studies_.size()));
        }
        for (std::size_t i = 0; i < studies_.size(); ++i) {
            const auto& s = studies_[i];
            if (!std::isfinite(s.effect)) {
                throw InputError("study " + std::to_string(i + 1) + ": effect is not finite");
            }
            if (!(s.within_var > 0.0) || !std::isfinite(s.within_var)) {
                throw InputError("study " + std::to_string(i + 1) +
                                 ": within-study variance must be positive and finite");
            }
        }
    }

    std::vector<StudyRecord> studies_;
};

/// S_r = Σ W_i^r with fixed-effect weights W_i = 1/v_i.
struct WeightSums {
    double s1 = 0.0;
    double s2 = 0.0;
    double s3 = 0.0;

    /// S1 − S2/S1, the DerSimonian–Laird denominator.
    [[nodiscard]] double dl_denominator() const noexcept { return s1 - s2 / s1; }
    friend bool operator==(const WeightSums&, const WeightSums&) = default;
};

[[nodiscard]] inline WeightSums weight_sums(const MetaDataset& data) noexcept {
    WeightSums ws;
    for (const auto& s : data) {
        const double w = 1.0 / s.within_var;
        ws.s1 += w;
        ws.s2 += w * w;
        ws.s3 += w * w * w;
    }
    return ws;
}

enum class Model { Fixed, Random };

struct PooledFit {
    double beta_hat = 0.0;
    double tau2_hat = 0.0;
    double tau2_untruncated = 0.0;
    double q = 0.0;
    double var_beta_hat = 0.0;   ///< 1 / Σ W*_i, W*_i = 1/(v_i + τ̂²)
    double var_beta_fixed = 0.0; ///< 1 / Σ W_i
    double var_tau2_hat = 0.0;   ///< Var(T²) at τ̂², truncation ignored
    WeightSums weight_sums;
    int k = 0;
    Model model = Model::Random;

    [[nodiscard]] double tau_hat() const noexcept { return std::sqrt(tau2_hat); }
    friend bool operator==(const PooledFit&, const PooledFit&) = default;
};

struct PooledEstimate {
    double beta_hat = 0.0;
    double var_beta_hat = 0.0;
};

/// Inverse-variance pooled effect with weights 1/(v_i + tau2); tau2 = 0 is
/// the fixed-effect fit.
[[nodiscard]] inline PooledEstimate pooled_estimate(const MetaDataset& data, double tau2) {
    if (!(tau2 >= 0.0)) throw DomainError("pooled_estimate requires tau2 >= 0");
    double sw = 0.0;
    double swy = 0.0;
    for (const auto& s : data) {
        const double w = 1.0 / (s.within_var + tau2);
        sw += w;
        swy += w * s.effect;
    }
    return {swy / sw, 1.0 / sw};
}

/// Cochran's Q = Σ W_i (Y_i − β̂_FE)².
[[nodiscard]] inline double cochran_q(const MetaDataset& data) {
    const double beta = pooled_estimate(data, 0.0).beta_hat;
    double q = 0.0;
    for (const auto& s : data) {
        const double d = s.effect - beta;
        q += d * d / s.within_var;
    }
    return q;
}

struct Tau2Estimate {
    double tau2 = 0.0;         ///< truncated at zero
    double untruncated = 0.0;
};

/// DerSimonian–Laird moment estimator max{0, (Q − (K−1)) / (S1 − S2/S1)}.
[[nodiscard]] inline Tau2Estimate dl_tau2(const MetaDataset& data) {
    const WeightSums ws = weight_sums(data);
    const double denom = ws.dl_denominator();
    if (!(denom > 0.0)) throw NumericError("degenerate weights: S1 - S2/S1 <= 0");
    const double raw = (cochran_q(data) - (data.k() - 1)) / denom;
    return {std::max(0.0, raw), raw};
}

/// Variance of Cochran's Q under the random-effects model (Biggerstaff–Tucker):
/// 2(K−1) + 4(S1 − S2/S1)τ² + 2(S2 − 2S3/S1 + S2²/S1²)τ⁴.
[[nodiscard]] inline double var_q(const WeightSums& ws, int k, double tau2) {
    if (!(tau2 >= 0.0)) throw DomainError("var_q requires tau2 >= 0");
    const double c1 = 4.0 * ws.dl_denominator();
    const double c2 = 2.0 * (ws.s2 - 2.0 * ws.s3 / ws.s1 + ws.s2 * ws.s2 / (ws.s1 * ws.s1));
    return 2.0 * (k - 1) + c1 * tau2 + c2 * tau2 * tau2;
}

/// Var(T²) = Var(Q) / (S1 − S2/S1)², ignoring truncation.
[[nodiscard]] inline double var_tau2(const WeightSums& ws, int k, double tau2) {
    const double denom = ws.dl_denominator();
    if (!(denom > 0.0)) throw NumericError("degenerate weights: S1 - S2/S1 <= 0");
    return var_q(ws, k, tau2) / (denom * denom);
}

[[nodiscard]] inline double var_tau2(const MetaDataset& data, double tau2) {
    return var_tau2(weight_sums(data), data.k(), tau2);
}

/// I² = max(0, (Q − (K−1)) / Q); zero when Q = 0.
[[nodiscard]] inline double i_squared(double q, int k) {
    if (k < 2) throw DomainError("i_squared requires k >= 2");
    if (!(q > 0.0)) return 0.0;
    return std::max(0.0, (q - (k - 1)) / q);
}

/// R_b = (1/K) Σ τ²/(v_i + τ²).
[[nodiscard]] inline double r_b(const MetaDataset& data, double tau2) {
    if (!(tau2 >= 0.0)) throw DomainError("r_b requires tau2 >= 0");
    if (tau2 == 0.0) return 0.0;
    double sum = 0.0;
    for (const auto& s : data) sum += tau2 / (s.within_var + tau2);
    return sum / static_cast<double>(data.size());
}

/// Diamond ratio sqrt(V_RE / V_FE).
[[nodiscard]] inline double diamond_ratio(const MetaDataset& data, double tau2) {
    return std::sqrt(pooled_estimate(data, tau2).var_beta_hat /
                     pooled_estimate(data, 0.0).var_beta_hat);
}

/// Between-study variance estimator used by fit_random_effects. Other
/// estimators plug in by providing the same call operator.
struct DerSimonianLaird {
    [[nodiscard]] Tau2Estimate operator()(const MetaDataset& data) const { return dl_tau2(data); }
};

template <class Estimator = DerSimonianLaird>
[[nodiscard]] PooledFit fit_random_effects(const MetaDataset& data, Estimator estimator = {}) {
    PooledFit fit;
    fit.k = data.k();
    fit.model = Model::Random;
    fit.weight_sums = weight_sums(data);
    fit.q = cochran_q(data);
    const Tau2Estimate t2 = estimator(data);
    fit.tau2_hat = t2.tau2;
    fit.tau2_untruncated = t2.untruncated;
    const PooledEstimate re = pooled_estimate(data, fit.tau2_hat);
    fit.beta_hat = re.beta_hat;
    fit.var_beta_hat = re.var_beta_hat;
    fit.var_beta_fixed = 1.0 / fit.weight_sums.s1;
    fit.var_tau2_hat = var_tau2(fit.weight_sums, fit.k, fit.tau2_hat);
    return fit;
}

[[nodiscard]] inline PooledFit fit_fixed_effect(const MetaDataset& data) {
    PooledFit fit;
    fit.k = data.k();
    fit.model = Model::Fixed;
    fit.weight_sums = weight_sums(data);
    fit.q = cochran_q(data);
    const PooledEstimate fe = pooled_estimate(data, 0.0);
    fit.beta_hat = fe.beta_hat;
    fit.var_beta_hat = fe.var_beta_hat;
    fit.var_beta_fixed = fe.var_beta_hat;
    fit.var_tau2_hat = var_tau2(fit.weight_sums, fit.k, 0.0);
    return fit;
}

}  // namespace hetcv
