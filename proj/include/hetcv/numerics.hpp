#pragma once

// Special functions, root finding, bounded 1-D optimisation and the random
// streams used by every other part of the library.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>

namespace hetcv {

/// Raised when an argument lies outside the mathematical domain of a function.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Raised when an iterative numerical routine cannot produce a result.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised by find_root when the supplied bracket does not straddle a root.
class BracketError : public NumericError {
public:
    using NumericError::NumericError;
};

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// A value in [0, 1]. Construction outside that range throws DomainError.
class Probability {
public:
    constexpr Probability() = default;
    explicit Probability(double value) : value_(value) {
        if (!(value >= 0.0 && value <= 1.0)) {
            throw DomainError("probability out of [0, 1]: " + std::to_string(value));
        }
    }
    [[nodiscard]] constexpr double value() const noexcept { return value_; }
    [[nodiscard]] constexpr double complement() const noexcept { return 1.0 - value_; }
    friend constexpr bool operator==(Probability, Probability) = default;

private:
    double value_ = 0.0;
};

// ---------------------------------------------------------------------------
// Normal distribution
// ---------------------------------------------------------------------------

[[nodiscard]] inline double norm_pdf(double x) noexcept {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

[[nodiscard]] inline double norm_cdf(double x) noexcept {
    return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

namespace detail {

template <std::size_t N>
constexpr double horner(const std::array<double, N>& c, double x) noexcept {
    double acc = 0.0;
    for (std::size_t i = N; i-- > 0;) acc = acc * x + c[i];
    return acc;
}

// Wichura's AS 241 (PPND16) coefficients, lowest order first.
inline constexpr std::array<double, 8> kCentralNum{
    3.387132872796366608, 133.14166789178437745, 1971.5909503065514427,
    13731.693765509461125, 45921.953931549871457, 67265.770927008700853,
    33430.575583588128105, 2509.0809287301226727};
inline constexpr std::array<double, 8> kCentralDen{
    1.0, 42.313330701600911252, 687.1870074920579083, 5394.1960214247511077,
    21213.794301586595867, 39307.89580009271061, 28729.085735721942674,
    5226.495278852545925};
inline constexpr std::array<double, 8> kMidNum{
    1.42343711074968357734, 4.6303378461565452959, 5.7694972214606914055,
    3.64784832476320460504, 1.27045825245236838258, 0.24178072517745061177,
    0.0227238449892691845833, 7.7454501427834140764e-4};
inline constexpr std::array<double, 8> kMidDen{
    1.0, 2.05319162663775882187, 1.6763848301838038494, 0.68976733498510000455,
    0.14810397642748007459, 0.0151986665636164571966, 5.475938084995344946e-4,
    1.05075007164441684324e-9};
inline constexpr std::array<double, 8> kTailNum{
    6.6579046435011037772, 5.4637849111641143699, 1.7848265399172913358,
    0.29656057182850489123, 0.026532189526576123093, 0.0012426609473880784386,
    2.71155556874348757815e-5, 2.01033439929228813265e-7};
inline constexpr std::array<double, 8> kTailDen{
    1.0, 0.59983220655588793769, 0.13692988092273580531, 0.0148753612908506148525,
    7.868691311456132591e-4, 1.8463183175100546818e-5, 1.4215117583164458887e-7,
    2.04426310338993978564e-15};

inline double ppnd16(double p) noexcept {
    const double q = p - 0.5;
    if (std::abs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        return q * horner(kCentralNum, r) / horner(kCentralDen, r);
    }
    double r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double x;
    if (r <= 5.0) {
        r -= 1.6;
        x = horner(kMidNum, r) / horner(kMidDen, r);
    } else {
        r -= 5.0;
        x = horner(kTailNum, r) / horner(kTailDen, r);
    }
    return q < 0.0 ? -x : x;
}

}  // namespace detail

/// Standard normal quantile Φ⁻¹(p) for 0 < p < 1.
[[nodiscard]] inline double norm_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw DomainError("norm_quantile requires 0 < p < 1, got " + std::to_string(p));
    }
    double x = detail::ppnd16(p);
    // One Newton step against norm_cdf, measured in whichever tail is smaller.
    const double dens = norm_pdf(x);
    if (dens > 0.0) {
        const double err = p < 0.5 ? norm_cdf(x) - p : (1.0 - p) - norm_cdf(-x);
        x -= err / dens;
    }
    return x;
}

/// Two-sided critical value z(α) = Φ⁻¹(1 − α/2).
[[nodiscard]] inline double two_sided_critical(double alpha) {
    return norm_quantile(1.0 - alpha / 2.0);
}

/// Inverse of two_sided_critical: α = 2(1 − Φ(c)).
[[nodiscard]] inline double two_sided_alpha(double critical) noexcept {
    return 2.0 * norm_cdf(-critical);
}

// ---------------------------------------------------------------------------
// Incomplete gamma and the chi-square distribution
// ---------------------------------------------------------------------------

namespace detail {

inline constexpr int kMaxGammaIter = 10000;
inline constexpr double kGammaEps = 2.0 * std::numeric_limits<double>::epsilon();

// Series for P(a, x); converges quickly for x < a + 1.
inline double gamma_p_series(double a, double x) {
    double term = 1.0 / a;
    double sum = term;
    for (int n = 1; n < kMaxGammaIter; ++n) {
        term *= x / (a + n);
        sum += term;
        if (std::abs(term) < std::abs(sum) * kGammaEps) {
            return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
        }
    }
    throw NumericError("incomplete gamma series did not converge");
}

// Modified Lentz continued fraction for Q(a, x); used for x >= a + 1.
inline double gamma_q_fraction(double a, double x) {
    constexpr double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < kMaxGammaIter; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < kGammaEps) {
            return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
        }
    }
    throw NumericError("incomplete gamma continued fraction did not converge");
}

}  // namespace detail

/// Regularised lower incomplete gamma P(a, x).
[[nodiscard]] inline double gamma_p(double a, double x) {
    if (!(a > 0.0) || x < 0.0) throw DomainError("gamma_p requires a > 0, x >= 0");
    if (x == 0.0) return 0.0;
    if (x == kInf) return 1.0;
    return x < a + 1.0 ? detail::gamma_p_series(a, x) : 1.0 - detail::gamma_q_fraction(a, x);
}

/// Regularised upper incomplete gamma Q(a, x) = 1 − P(a, x).
[[nodiscard]] inline double gamma_q(double a, double x) {
    if (!(a > 0.0) || x < 0.0) throw DomainError("gamma_q requires a > 0, x >= 0");
    if (x == 0.0) return 1.0;
    if (x == kInf) return 0.0;
    return x < a + 1.0 ? 1.0 - detail::gamma_p_series(a, x) : detail::gamma_q_fraction(a, x);
}

[[nodiscard]] inline double chisq_cdf(double x, double df) {
    if (!(df > 0.0)) throw DomainError("chisq_cdf requires df > 0");
    return x <= 0.0 ? 0.0 : gamma_p(0.5 * df, 0.5 * x);
}

[[nodiscard]] inline double chisq_pdf(double x, double df) {
    if (x <= 0.0) return 0.0;
    const double a = 0.5 * df;
    return std::exp((a - 1.0) * std::log(0.5 * x) - 0.5 * x - std::lgamma(a)) * 0.5;
}

/// Chi-square quantile: the x with ChiSq_df CDF(x) = p.
///
/// Wilson–Hilferty start, then Newton steps on the incomplete gamma function
/// kept inside a shrinking bracket (bisection whenever a step leaves it).
/// The residual is taken in the smaller tail so upper quantiles keep full
/// relative accuracy.
[[nodiscard]] inline double chisq_quantile(double p, double df) {
    if (!(p > 0.0 && p < 1.0)) {
        throw DomainError("chisq_quantile requires 0 < p < 1, got " + std::to_string(p));
    }
    if (!(df > 0.0)) throw DomainError("chisq_quantile requires df > 0");

    const bool lower_tail = p < 0.5;
    const double target = lower_tail ? p : 1.0 - p;
    // Increasing in x; the upper tail uses Q directly to keep precision.
    auto residual = [&](double x) {
        return lower_tail ? chisq_cdf(x, df) - target : target - gamma_q(0.5 * df, 0.5 * x);
    };

    const double z = norm_quantile(p);
    const double h = 2.0 / (9.0 * df);
    double x = df * std::pow(1.0 - h + z * std::sqrt(h), 3);
    if (!(x > 0.0)) {
        // Small-x expansion: P(a, y) ≈ y^a / Γ(a + 1).
        const double a = 0.5 * df;
        x = 2.0 * std::exp((std::log(p) + std::lgamma(a + 1.0)) / a);
    }

    double lo = 0.0;
    double hi = std::max(2.0 * x, df + 10.0 * std::sqrt(2.0 * df) + 10.0);
    while (residual(hi) < 0.0) hi *= 2.0;

    for (int iter = 0; iter < 200; ++iter) {
        const double f = residual(x);
        if (f == 0.0) return x;
        if (f < 0.0) lo = std::max(lo, x); else hi = std::min(hi, x);
        const double dens = chisq_pdf(x, df);
        double next = dens > 0.0 ? x - f / dens : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - x) <= 1e-15 * std::max(x, 1e-300) || hi - lo <= 1e-15 * hi) {
            return next;
        }
        x = next;
    }
    return x;
}

// ---------------------------------------------------------------------------
// Root finding
// ---------------------------------------------------------------------------

/// Brent's method on [lo, hi]. f(lo) and f(hi) must differ in sign (or one
/// of them be zero). Terminates once the bracket is narrower than
/// tol + 4·eps·|x|.
template <class F>
[[nodiscard]] double find_root(F&& f, double lo, double hi, double tol) {
    double a = lo;
    double b = hi;
    double fa = f(a);
    double fb = f(b);
    if (fa == 0.0) return a;
    if (fb == 0.0) return b;
    if (!(std::isfinite(fa) && std::isfinite(fb)) || (fa > 0.0) == (fb > 0.0)) {
        throw BracketError("find_root: no sign change on [" + std::to_string(lo) + ", " +
                           std::to_string(hi) + "]");
    }
    constexpr double eps = std::numeric_limits<double>::epsilon();
    double c = a;
    double fc = fa;
    double d = b - a;
    double e = d;
    for (int iter = 0; iter < 300; ++iter) {
        if ((fb > 0.0) == (fc > 0.0)) {
            c = a;
            fc = fa;
            d = e = b - a;
        }
        if (std::abs(fc) < std::abs(fb)) {
            a = b; b = c; c = a;
            fa = fb; fb = fc; fc = fa;
        }
        const double tol1 = 2.0 * eps * std::abs(b) + 0.5 * tol;
        const double m = 0.5 * (c - b);
        if (std::abs(m) <= tol1 || fb == 0.0) return b;
        if (std::abs(e) >= tol1 && std::abs(fa) > std::abs(fb)) {
            // Inverse quadratic interpolation, or secant when only two points.
            double p;
            double q;
            const double s = fb / fa;
            if (a == c) {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                const double qa = fa / fc;
                const double r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if (p > 0.0) q = -q; else p = -p;
            if (2.0 * p < std::min(3.0 * m * q - std::abs(tol1 * q), std::abs(e * q))) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += std::abs(d) > tol1 ? d : (m > 0.0 ? tol1 : -tol1);
        fb = f(b);
    }
    throw NumericError("find_root: iteration limit reached");
}

// ---------------------------------------------------------------------------
// Bounded 1-D optimisation
// ---------------------------------------------------------------------------

enum class OptimizeMode { Minimize, Maximize };

struct OptimizeResult {
    double argopt = 0.0;
    double value = 0.0;
    int evaluations = 0;
};

/// Optimises f on [lo, hi]: a uniform grid of `grid_points` (endpoints
/// included) locates the best cell, then golden-section search refines
/// inside the two neighbouring cells. Ties resolve to the smallest argument.
/// Infinite objective values are legal; an infinite optimum on the grid is
/// returned as-is.
template <class F>
[[nodiscard]] OptimizeResult optimize_1d(F&& f, double lo, double hi, OptimizeMode mode,
                                         double tol = 1e-10, int grid_points = 129) {
    if (!(hi >= lo)) throw DomainError("optimize_1d: empty domain");
    grid_points = std::max(grid_points, 3);
    const double sign = mode == OptimizeMode::Maximize ? -1.0 : 1.0;
    // Minimise g = sign * f; NaN ranks worst.
    auto g = [&](double x) {
        const double v = sign * f(x);
        return std::isnan(v) ? kInf : v;
    };
    auto better = [](double cand, double best) { return cand < best; };

    OptimizeResult out;
    const double step = (hi - lo) / (grid_points - 1);
    int best_i = 0;
    double best_g = kInf;
    bool have_best = false;
    for (int i = 0; i < grid_points; ++i) {
        const double x = i + 1 == grid_points ? hi : lo + i * step;
        const double v = g(x);
        ++out.evaluations;
        if (!have_best || better(v, best_g)) {
            best_g = v;
            best_i = i;
            have_best = true;
        }
    }
    double best_x = best_i + 1 == grid_points ? hi : lo + best_i * step;

    if (std::isfinite(best_g) && step > 0.0) {
        double a = best_i == 0 ? lo : lo + (best_i - 1) * step;
        double b = best_i + 1 >= grid_points ? hi : std::min(hi, lo + (best_i + 1) * step);
        const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
        double x1 = b - inv_phi * (b - a);
        double x2 = a + inv_phi * (b - a);
        double g1 = g(x1);
        double g2 = g(x2);
        out.evaluations += 2;
        while (b - a > tol) {
            if (g1 <= g2) {
                b = x2;
                x2 = x1;
                g2 = g1;
                x1 = b - inv_phi * (b - a);
                g1 = g(x1);
            } else {
                a = x1;
                x1 = x2;
                g1 = g2;
                x2 = a + inv_phi * (b - a);
                g2 = g(x2);
            }
            ++out.evaluations;
        }
        const double xm = g1 <= g2 ? x1 : x2;
        const double gm = std::min(g1, g2);
        if (better(gm, best_g)) {
            best_g = gm;
            best_x = xm;
        }
    }
    out.argopt = best_x;
    out.value = sign * best_g;
    if (std::isinf(best_g) && best_g > 0.0) {
        // Every grid point was NaN or the wrong-signed infinity.
        out.value = f(best_x);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Random streams
// ---------------------------------------------------------------------------

/// Deterministic random stream keyed by (seed, stream index). Each
/// simulation replicate gets its own stream so results do not depend on
/// scheduling.
class RngStream {
public:
    using engine_type = std::mt19937_64;
    using result_type = engine_type::result_type;

    RngStream(std::uint64_t seed, std::uint64_t stream = 0) : seed_(seed), stream_(stream) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(stream),
                          static_cast<std::uint32_t>(stream >> 32), 0x68657463u};
        engine_.seed(seq);
    }

    /// Independent child stream for trial `index`.
    [[nodiscard]] RngStream split(std::uint64_t index) const {
        return RngStream(seed_ ^ (stream_ * 0x9E3779B97F4A7C15ull + 0xD1B54A32D192ED03ull), index);
    }

    static constexpr result_type min() { return engine_type::min(); }
    static constexpr result_type max() { return engine_type::max(); }
    result_type operator()() { return engine_(); }

    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
    [[nodiscard]] std::uint64_t stream() const noexcept { return stream_; }

    double normal() { return std::normal_distribution<double>{}(engine_); }
    double normal(double mean, double sd) { return mean + sd * normal(); }
    double chi_squared(double df) { return std::chi_squared_distribution<double>{df}(engine_); }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    engine_type engine_;
};

/// Noncentral t draw built as (Z + ncp) / sqrt(X / df), X ~ ChiSq_df.
[[nodiscard]] inline double sample_noncentral_t(double df, double ncp, RngStream& rng) {
    if (!(df > 0.0)) throw DomainError("sample_noncentral_t requires df > 0");
    const double z = rng.normal();
    const double chi = rng.chi_squared(df);
    return (z + ncp) / std::sqrt(chi / df);
}

}  // namespace hetcv
