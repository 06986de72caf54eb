#pragma once

// Analysis of a single meta-analysis dataset and its serialisation.
//
// JSON keeps full precision; an infinite bound is written as null together
// with an `*_infinite` flag. CSV and text output use 6 significant digits
// and the token "inf".

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "hetcv/ingest.hpp"
#include "hetcv/intervals.hpp"
#include "hetcv/measures.hpp"
#include "hetcv/meta_core.hpp"

namespace hetcv {

inline constexpr std::string_view kVersion = "1.0.0";

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Formatting helpers
// ---------------------------------------------------------------------------

/// 6 significant digits; "inf" / "-inf" / "nan" for non-finite values.
[[nodiscard]] inline std::string format6(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

/// JSON number, or null when x is infinite.
[[nodiscard]] inline json json_number(double x) {
    return std::isinf(x) ? json(nullptr) : json(x);
}

/// Inverse of json_number: null reads back as +inf.
[[nodiscard]] inline double number_from_json(const json& j) {
    return j.is_null() ? kInf : j.get<double>();
}

// ---------------------------------------------------------------------------
// Enum <-> string
// ---------------------------------------------------------------------------

[[nodiscard]] inline std::optional<Method> parse_method(std::string_view s) {
    for (Method m : {Method::Wald, Method::FixedTau, Method::FixedBeta, Method::Both,
                     Method::AlphaAdjusted, Method::PropImp, Method::QProfile}) {
        if (to_string(m) == s) return m;
    }
    if (s == "alpha_adj" || s == "alpha-adjusted") return Method::AlphaAdjusted;
    return std::nullopt;
}

[[nodiscard]] inline std::optional<Quantity> parse_quantity(std::string_view s) {
    for (Quantity q : {Quantity::CvB, Quantity::M1, Quantity::M2, Quantity::Tau2, Quantity::Tau,
                       Quantity::Beta, Quantity::AbsBeta, Quantity::BetaSq}) {
        if (to_string(q) == s) return q;
    }
    return std::nullopt;
}

/// Comma-separated method list, e.g. "propimp,alpha-adj,wald".
[[nodiscard]] inline std::vector<Method> parse_method_list(std::string_view list) {
    std::vector<Method> out;
    std::size_t pos = 0;
    while (pos <= list.size()) {
        const std::size_t next = std::min(list.find(',', pos), list.size());
        const std::string item = detail::trim(list.substr(pos, next - pos));
        if (!item.empty()) {
            const auto m = parse_method(item);
            if (!m || *m == Method::QProfile) {
                throw InputError("unknown interval method '" + item +
                                 "' (expected wald, fixed-tau, fixed-beta, both, alpha-adj, "
                                 "propimp)");
            }
            out.push_back(*m);
        }
        pos = next + 1;
    }
    if (out.empty()) throw InputError("empty method list");
    return out;
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

struct AnalysisOptions {
    std::vector<Method> methods{Method::PropImp, Method::AlphaAdjusted, Method::Wald};
    double alpha = 0.05;
};

struct Provenance {
    std::string input_path;
    std::string version{kVersion};
    double alpha = 0.05;
    std::vector<Method> methods;
    std::string smd;  ///< "hedges", "none", or empty for (yi, vi) input
    std::optional<std::uint64_t> seed;
    friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct AnalysisReport {
    PooledFit fit;
    HetMeasures measures;
    /// Q-profile interval for τ², Wald interval for β, then one entry per
    /// (method, measure) in the order requested.
    std::vector<IntervalEstimate> intervals;
    std::vector<std::string> warnings;
    Provenance provenance;
    friend bool operator==(const AnalysisReport&, const AnalysisReport&) = default;
};

/// Point estimate of any reportable quantity from a fit.
[[nodiscard]] inline double point_estimate(const PooledFit& fit, Quantity q) {
    const CvMeasure cv = cv_measures(fit.tau_hat(), fit.beta_hat);
    switch (q) {
        case Quantity::CvB: return cv.cv_b;
        case Quantity::M1: return cv.m1;
        case Quantity::M2: return cv.m2;
        case Quantity::Tau2: return fit.tau2_hat;
        case Quantity::Tau: return fit.tau_hat();
        case Quantity::Beta: return fit.beta_hat;
        case Quantity::AbsBeta: return std::abs(fit.beta_hat);
        case Quantity::BetaSq: return fit.beta_hat * fit.beta_hat;
    }
    return 0.0;
}

/// Random-effects (DerSimonian–Laird) analysis with the requested intervals.
[[nodiscard]] inline AnalysisReport analyze(const MetaDataset& data, const AnalysisOptions& opts,
                                            Provenance provenance = {}) {
    const Probability alpha(opts.alpha);
    if (!(opts.alpha > 0.0 && opts.alpha < 1.0)) throw InputError("alpha must lie in (0, 1)");

    AnalysisReport rep;
    rep.fit = fit_random_effects(data);
    rep.measures = het_measures(data, rep.fit);
    provenance.alpha = opts.alpha;
    provenance.methods = opts.methods;
    rep.provenance = std::move(provenance);

    if (!(rep.fit.tau2_hat > 0.0)) {
        rep.warnings.emplace_back(
            "tau2_hat is zero: measure intervals are maximal ([0, 1] for M1/M2, [0, inf) for "
            "CV_B)");
    }
    if (rep.fit.beta_hat == 0.0) {
        rep.warnings.emplace_back("beta_hat is zero: CV_B is infinite");
    }

    rep.intervals.push_back(tau2_ci_qprofile(data, alpha));
    rep.intervals.push_back(beta_ci(rep.fit, alpha));

    const ComponentIntervals comp(data, rep.fit);
    for (Method method : opts.methods) {
        if (method == Method::PropImp) {
            for (const auto& ci : propimp_all_measures(comp, alpha)) rep.intervals.push_back(ci);
            continue;
        }
        for (Measure m : kAllMeasures) rep.intervals.push_back(measure_interval(comp, m, method, alpha));
    }
    return rep;
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

inline void to_json(json& j, const IntervalEstimate& ci) {
    j = json{{"quantity", std::string(to_string(ci.quantity))},
             {"method", std::string(to_string(ci.method))},
             {"lower", ci.lower},
             {"upper", json_number(ci.upper)},
             {"upper_infinite", ci.upper_infinite()},
             {"alpha_tau", ci.alpha_tau.value()},
             {"alpha_beta", ci.alpha_beta.value()},
             {"degenerate", ci.degenerate}};
}

inline void from_json(const json& j, IntervalEstimate& ci) {
    const auto q = parse_quantity(j.at("quantity").get<std::string>());
    const auto m = parse_method(j.at("method").get<std::string>());
    if (!q || !m) throw InputError("interval: unknown quantity or method");
    ci.quantity = *q;
    ci.method = *m;
    ci.lower = j.at("lower").get<double>();
    ci.upper = number_from_json(j.at("upper"));
    ci.alpha_tau = Probability(j.at("alpha_tau").get<double>());
    ci.alpha_beta = Probability(j.at("alpha_beta").get<double>());
    ci.degenerate = j.at("degenerate").get<bool>();
}

inline void to_json(json& j, const PooledFit& f) {
    j = json{{"model", f.model == Model::Random ? "random" : "fixed"},
             {"k", f.k},
             {"beta_hat", f.beta_hat},
             {"tau2_hat", f.tau2_hat},
             {"tau2_untruncated", f.tau2_untruncated},
             {"q", f.q},
             {"var_beta_hat", f.var_beta_hat},
             {"var_beta_fixed", f.var_beta_fixed},
             {"var_tau2_hat", f.var_tau2_hat},
             {"s1", f.weight_sums.s1},
             {"s2", f.weight_sums.s2},
             {"s3", f.weight_sums.s3}};
}

inline void from_json(const json& j, PooledFit& f) {
    f.model = j.at("model").get<std::string>() == "fixed" ? Model::Fixed : Model::Random;
    j.at("k").get_to(f.k);
    j.at("beta_hat").get_to(f.beta_hat);
    j.at("tau2_hat").get_to(f.tau2_hat);
    j.at("tau2_untruncated").get_to(f.tau2_untruncated);
    j.at("q").get_to(f.q);
    j.at("var_beta_hat").get_to(f.var_beta_hat);
    j.at("var_beta_fixed").get_to(f.var_beta_fixed);
    j.at("var_tau2_hat").get_to(f.var_tau2_hat);
    j.at("s1").get_to(f.weight_sums.s1);
    j.at("s2").get_to(f.weight_sums.s2);
    j.at("s3").get_to(f.weight_sums.s3);
}

inline void to_json(json& j, const HetMeasures& m) {
    j = json{{"i2", m.i2},         {"dr", m.dr}, {"rb", m.rb},
             {"cv_b", json_number(m.cv_b)}, {"cv_b_infinite", std::isinf(m.cv_b)},
             {"m1", m.m1},         {"m2", m.m2}};
}

inline void from_json(const json& j, HetMeasures& m) {
    j.at("i2").get_to(m.i2);
    j.at("dr").get_to(m.dr);
    j.at("rb").get_to(m.rb);
    m.cv_b = number_from_json(j.at("cv_b"));
    j.at("m1").get_to(m.m1);
    j.at("m2").get_to(m.m2);
}

inline void to_json(json& j, const Provenance& p) {
    json methods = json::array();
    for (Method m : p.methods) methods.push_back(std::string(to_string(m)));
    j = json{{"input", p.input_path}, {"version", p.version}, {"alpha", p.alpha},
             {"methods", methods},    {"smd", p.smd},         {"seed", nullptr}};
    if (p.seed) j["seed"] = *p.seed;
}

inline void from_json(const json& j, Provenance& p) {
    j.at("input").get_to(p.input_path);
    j.at("version").get_to(p.version);
    j.at("alpha").get_to(p.alpha);
    p.methods.clear();
    for (const auto& m : j.at("methods")) {
        const auto parsed = parse_method(m.get<std::string>());
        if (!parsed) throw InputError("provenance: unknown method");
        p.methods.push_back(*parsed);
    }
    j.at("smd").get_to(p.smd);
    if (j.at("seed").is_null()) {
        p.seed.reset();
    } else {
        p.seed = j.at("seed").get<std::uint64_t>();
    }
}

inline void to_json(json& j, const AnalysisReport& r) {
    j = json{{"fit", r.fit},
             {"measures", r.measures},
             {"intervals", r.intervals},
             {"warnings", r.warnings},
             {"degenerate", !r.warnings.empty() && !(r.fit.tau2_hat > 0.0)},
             {"provenance", r.provenance}};
}

inline void from_json(const json& j, AnalysisReport& r) {
    j.at("fit").get_to(r.fit);
    j.at("measures").get_to(r.measures);
    j.at("intervals").get_to(r.intervals);
    j.at("warnings").get_to(r.warnings);
    j.at("provenance").get_to(r.provenance);
}

// ---------------------------------------------------------------------------
// CSV and text
// ---------------------------------------------------------------------------

/// One row per interval:
/// quantity,method,estimate,lower,upper,alpha_tau,alpha_beta,degenerate
[[nodiscard]] inline std::string report_csv(const AnalysisReport& r) {
    std::ostringstream os;
    os << "quantity,method,estimate,lower,upper,alpha_tau,alpha_beta,degenerate\n";
    for (const auto& ci : r.intervals) {
        os << to_string(ci.quantity) << ',' << to_string(ci.method) << ','
           << format6(point_estimate(r.fit, ci.quantity)) << ',' << format6(ci.lower) << ','
           << format6(ci.upper) << ',' << format6(ci.alpha_tau.value()) << ','
           << format6(ci.alpha_beta.value()) << ',' << (ci.degenerate ? "true" : "false") << '\n';
    }
    return os.str();
}

[[nodiscard]] inline std::string report_text(const AnalysisReport& r) {
    std::ostringstream os;
    const auto& f = r.fit;
    const auto& m = r.measures;
    os << "Random-effects meta-analysis (DerSimonian-Laird), K = " << f.k << "\n"
       << "  beta_hat = " << format6(f.beta_hat) << "  (SE " << format6(std::sqrt(f.var_beta_hat))
       << ")\n"
       << "  tau2_hat = " << format6(f.tau2_hat) << "  tau_hat = " << format6(f.tau_hat())
       << "  Q = " << format6(f.q) << "\n\n"
       << "Heterogeneity measures\n"
       << "  I2   = " << format6(100.0 * m.i2) << "%\n"
       << "  DR   = " << format6(m.dr) << "\n"
       << "  R_b  = " << format6(m.rb) << "\n"
       << "  CV_B = " << format6(m.cv_b) << "\n"
       << "  M1   = " << format6(m.m1) << "\n"
       << "  M2   = " << format6(m.m2) << "\n\n"
       << "Intervals (alpha = " << format6(r.provenance.alpha) << ")\n";
    for (const auto& ci : r.intervals) {
        char line[160];
        std::snprintf(line, sizeof line, "  %-9s %-10s (%s, %s)%s\n",
                      std::string(to_string(ci.quantity)).c_str(),
                      std::string(to_string(ci.method)).c_str(), format6(ci.lower).c_str(),
                      format6(ci.upper).c_str(), ci.degenerate ? "  [degenerate]" : "");
        os << line;
    }
    for (const auto& w : r.warnings) os << "warning: " << w << "\n";
    return os.str();
}

}  // namespace hetcv
