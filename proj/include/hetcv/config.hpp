#pragma once

// Scenario configuration files and simulation result output.
//
// A config is a JSON object. Top-level keys act as defaults for the
// optional "scenarios" array; each block expands over the cartesian
// product of its beta, tau and k values (k innermost):
//
//   {
//     "name": "figure3_beta02",
//     "beta": 0.2, "tau": [0.2, 0.4], "k": [10, 20], "arm_size": 30,
//     "reps": 2000, "seed": 11, "alpha": 0.05,
//     "methods": ["alpha-adj", "propimp", "wald"]
//   }
//
// Studies come from exactly one of
//   arm_size      n per arm (int) or [n1, n2], repeated k times
//   sample_sizes  total sizes, split ceil/floor across the two arms
//   arm_sizes     explicit [[n1, n2], ...]
//   within_vars   fixed within-study variances (normal effects)

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "hetcv/report.hpp"
#include "hetcv/simulator.hpp"

namespace hetcv {

/// Invalid simulation config; the message starts with the offending field path.
class ConfigError : public InputError {
public:
    ConfigError(const std::string& path, const std::string& what)
        : InputError("config field '" + path + "': " + what), path_(path) {}
    [[nodiscard]] const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

struct SimulationConfig {
    std::string name = "simulation";
    std::vector<Scenario> scenarios;
    json source;  ///< the parsed config, echoed into JSON output
};

namespace detail {

inline double config_number(const json& j, const std::string& path) {
    if (!j.is_number()) throw ConfigError(path, "expected a number");
    return j.get<double>();
}

inline int config_int(const json& j, const std::string& path, int min_value) {
    if (!j.is_number_integer() && !(j.is_number() && j.get<double>() == std::floor(j.get<double>()))) {
        throw ConfigError(path, "expected an integer");
    }
    const double v = j.get<double>();
    if (v < min_value || v > 1e9) {
        throw ConfigError(path, "must be >= " + std::to_string(min_value));
    }
    return static_cast<int>(v);
}

inline std::vector<double> number_list(const json& j, const std::string& path) {
    if (j.is_number()) return {j.get<double>()};
    if (!j.is_array() || j.empty()) throw ConfigError(path, "expected a number or non-empty array");
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        out.push_back(config_number(j[i], path + "[" + std::to_string(i) + "]"));
    }
    return out;
}

inline std::vector<int> int_list(const json& j, const std::string& path, int min_value) {
    if (j.is_number()) return {config_int(j, path, min_value)};
    if (!j.is_array() || j.empty()) throw ConfigError(path, "expected an integer or non-empty array");
    std::vector<int> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        out.push_back(config_int(j[i], path + "[" + std::to_string(i) + "]", min_value));
    }
    return out;
}

inline ArmSizes arm_pair(const json& j, const std::string& path) {
    if (j.is_number()) {
        const int n = config_int(j, path, 1);
        return {n, n};
    }
    if (!j.is_array() || j.size() != 2) throw ConfigError(path, "expected n or [n1, n2]");
    return {config_int(j[0], path + "[0]", 1), config_int(j[1], path + "[1]", 1)};
}

inline std::string scenario_label(const std::string& name, double beta, double tau, int k) {
    return name + "/beta=" + format6(beta) + ",tau=" + format6(tau) + ",k=" + std::to_string(k);
}

inline const std::vector<std::string>& known_keys() {
    static const std::vector<std::string> keys{
        "name",         "beta",      "tau",         "k",     "arm_size", "sample_sizes",
        "arm_sizes",    "within_vars", "reps",      "seed",  "alpha",    "methods",
        "scenarios",    "description"};
    return keys;
}

inline void expand_block(const json& block, const std::string& path, const std::string& name,
                         std::vector<Scenario>& out) {
    for (const auto& [key, value] : block.items()) {
        if (std::find(known_keys().begin(), known_keys().end(), key) == known_keys().end()) {
            throw ConfigError(path + key, "unknown field");
        }
    }
    auto require = [&](const char* key) -> const json& {
        if (!block.contains(key)) throw ConfigError(path + key, "required field missing");
        return block.at(key);
    };

    const std::vector<double> betas = number_list(require("beta"), path + "beta");
    const std::vector<double> taus = number_list(require("tau"), path + "tau");
    for (std::size_t i = 0; i < taus.size(); ++i) {
        if (!(taus[i] >= 0.0)) throw ConfigError(path + "tau", "tau must be >= 0");
    }

    Scenario base;
    if (block.contains("reps")) base.reps = config_int(block.at("reps"), path + "reps", 1);
    if (block.contains("seed")) {
        const json& s = block.at("seed");
        if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<std::int64_t>() >= 0)) {
            throw ConfigError(path + "seed", "expected a non-negative integer");
        }
        base.seed = s.get<std::uint64_t>();
    }
    if (block.contains("alpha")) {
        base.alpha = config_number(block.at("alpha"), path + "alpha");
        if (!(base.alpha > 0.0 && base.alpha < 1.0)) {
            throw ConfigError(path + "alpha", "must lie in (0, 1)");
        }
    }
    if (block.contains("methods")) {
        const json& ms = block.at("methods");
        if (!ms.is_array() || ms.empty()) throw ConfigError(path + "methods", "expected a non-empty array");
        base.methods.clear();
        for (std::size_t i = 0; i < ms.size(); ++i) {
            const std::string p = path + "methods[" + std::to_string(i) + "]";
            if (!ms[i].is_string()) throw ConfigError(p, "expected a string");
            const auto m = parse_method(ms[i].get<std::string>());
            if (!m || *m == Method::QProfile) throw ConfigError(p, "unknown method '" + ms[i].get<std::string>() + "'");
            base.methods.push_back(*m);
        }
    }

    const int sources = static_cast<int>(block.contains("arm_size")) +
                        static_cast<int>(block.contains("sample_sizes")) +
                        static_cast<int>(block.contains("arm_sizes")) +
                        static_cast<int>(block.contains("within_vars"));
    if (sources != 1) {
        throw ConfigError(path + "arm_size",
                          "exactly one of arm_size, sample_sizes, arm_sizes, within_vars required");
    }

    // Study layouts: one per k value when arm_size is used, otherwise one fixed layout.
    std::vector<std::pair<std::vector<ArmSizes>, std::vector<double>>> layouts;
    if (block.contains("arm_size")) {
        const ArmSizes arms = arm_pair(block.at("arm_size"), path + "arm_size");
        if (arms.n1 + arms.n2 <= 2) throw ConfigError(path + "arm_size", "n1 + n2 must exceed 2");
        for (int k : int_list(require("k"), path + "k", 2)) {
            layouts.push_back({std::vector<ArmSizes>(static_cast<std::size_t>(k), arms), {}});
        }
    } else {
        if (block.contains("k")) throw ConfigError(path + "k", "k is only valid with arm_size");
        std::vector<ArmSizes> arms;
        std::vector<double> vars;
        if (block.contains("sample_sizes")) {
            for (int n : int_list(block.at("sample_sizes"), path + "sample_sizes", 3)) {
                arms.push_back(split_arms(n));
            }
        } else if (block.contains("arm_sizes")) {
            const json& a = block.at("arm_sizes");
            if (!a.is_array()) throw ConfigError(path + "arm_sizes", "expected an array");
            for (std::size_t i = 0; i < a.size(); ++i) {
                const std::string p = path + "arm_sizes[" + std::to_string(i) + "]";
                arms.push_back(arm_pair(a[i], p));
                if (arms.back().n1 + arms.back().n2 <= 2) throw ConfigError(p, "n1 + n2 must exceed 2");
            }
        } else {
            vars = number_list(block.at("within_vars"), path + "within_vars");
            for (std::size_t i = 0; i < vars.size(); ++i) {
                if (!(vars[i] > 0.0)) {
                    throw ConfigError(path + "within_vars[" + std::to_string(i) + "]",
                                      "variance must be positive");
                }
            }
        }
        const std::size_t k = arms.empty() ? vars.size() : arms.size();
        if (k < 2) throw ConfigError(path + (arms.empty() ? "within_vars" : "sample_sizes"),
                                     "at least two studies required");
        layouts.push_back({std::move(arms), std::move(vars)});
    }

    for (double beta : betas) {
        for (double tau : taus) {
            for (const auto& [arms, vars] : layouts) {
                Scenario sc = base;
                sc.beta = beta;
                sc.tau = tau;
                sc.arm_sizes = arms;
                sc.within_vars = vars;
                sc.name = scenario_label(name, beta, tau, sc.k());
                sc.validate();
                out.push_back(std::move(sc));
            }
        }
    }
}

}  // namespace detail

[[nodiscard]] inline SimulationConfig parse_simulation_config(const json& j) {
    if (!j.is_object()) throw ConfigError("$", "config must be a JSON object");
    SimulationConfig cfg;
    cfg.source = j;
    if (j.contains("name")) {
        if (!j.at("name").is_string()) throw ConfigError("name", "expected a string");
        cfg.name = j.at("name").get<std::string>();
    }
    if (j.contains("scenarios")) {
        const json& blocks = j.at("scenarios");
        if (!blocks.is_array() || blocks.empty()) {
            throw ConfigError("scenarios", "expected a non-empty array");
        }
        json defaults = j;
        defaults.erase("scenarios");
        for (std::size_t i = 0; i < blocks.size(); ++i) {
            const std::string path = "scenarios[" + std::to_string(i) + "].";
            if (!blocks[i].is_object()) throw ConfigError("scenarios[" + std::to_string(i) + "]", "expected an object");
            json merged = defaults;
            // A block that names its own study source replaces the inherited one.
            static const char* const kSources[] = {"arm_size", "sample_sizes", "arm_sizes", "within_vars"};
            for (const char* s : kSources) {
                if (blocks[i].contains(s)) {
                    for (const char* t : kSources) merged.erase(t);
                    break;
                }
            }
            merged.update(blocks[i]);
            std::string block_name = cfg.name;
            if (blocks[i].contains("name")) {
                if (!blocks[i].at("name").is_string()) throw ConfigError(path + "name", "expected a string");
                block_name = blocks[i].at("name").get<std::string>();
            }
            detail::expand_block(merged, path, block_name, cfg.scenarios);
        }
    } else {
        detail::expand_block(j, "", cfg.name, cfg.scenarios);
    }
    return cfg;
}

[[nodiscard]] inline SimulationConfig load_simulation_config(const std::string& file) {
    std::ifstream in(file);
    if (!in) throw InputError("cannot open config file: " + file);
    json j;
    try {
        j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw ConfigError("$", std::string("invalid JSON: ") + e.what());
    }
    return parse_simulation_config(j);
}

/// Command-line overrides applied to every scenario.
inline void apply_overrides(SimulationConfig& cfg, std::optional<int> reps,
                            std::optional<std::uint64_t> seed) {
    for (auto& sc : cfg.scenarios) {
        if (reps) sc.reps = *reps;
        if (seed) sc.seed = *seed;
        sc.validate();
    }
}

// ---------------------------------------------------------------------------
// Result output
// ---------------------------------------------------------------------------

/// One row per (scenario, method). Width columns are per measure.
[[nodiscard]] inline std::string coverage_csv(const std::vector<CoverageResult>& results) {
    std::ostringstream os;
    os << "scenario,k,beta,tau,generator,reps,seed,alpha,method,covered,coverage,truncation_rate,"
          "measure_disagreements,width_mean_cv_b,width_median_cv_b,width_mean_m1,"
          "width_median_m1,width_mean_m2,width_median_m2\n";
    for (const auto& res : results) {
        const Scenario& sc = res.scenario;
        for (const auto& mc : res.methods) {
            os << '"' << sc.name << "\"," << sc.k() << ',' << format6(sc.beta) << ','
               << format6(sc.tau) << ',' << (sc.smd_mode() ? "smd" : "normal") << ',' << sc.reps
               << ',' << sc.seed << ',' << format6(sc.alpha) << ',' << to_string(mc.method) << ','
               << mc.covered << ',' << format6(mc.coverage) << ','
               << format6(res.truncation_rate) << ',' << mc.measure_disagreements;
            for (const auto& w : mc.widths) os << ',' << format6(w.mean) << ',' << format6(w.median);
            os << '\n';
        }
    }
    return os.str();
}

inline json scenario_json(const Scenario& sc) {
    json methods = json::array();
    for (Method m : sc.methods) methods.push_back(std::string(to_string(m)));
    json j{{"name", sc.name}, {"k", sc.k()},       {"beta", sc.beta},   {"tau", sc.tau},
           {"reps", sc.reps}, {"seed", sc.seed},   {"alpha", sc.alpha}, {"methods", methods},
           {"generator", sc.smd_mode() ? "smd" : "normal"}};
    if (sc.smd_mode()) {
        json arms = json::array();
        for (const auto& a : sc.arm_sizes) arms.push_back({a.n1, a.n2});
        j["arm_sizes"] = arms;
    } else {
        j["within_vars"] = sc.within_vars;
    }
    return j;
}

[[nodiscard]] inline json coverage_json(const SimulationConfig& cfg,
                                        const std::vector<CoverageResult>& results) {
    static constexpr const char* kMeasureKeys[] = {"cv_b", "m1", "m2"};
    json out{{"name", cfg.name}, {"version", std::string(kVersion)}, {"config", cfg.source}};
    json rows = json::array();
    for (const auto& res : results) {
        json methods = json::array();
        for (const auto& mc : res.methods) {
            json widths = json::object();
            for (std::size_t i = 0; i < 3; ++i) {
                const auto& w = mc.widths[i];
                widths[kMeasureKeys[i]] = {{"mean", json_number(w.mean)},
                                           {"mean_infinite", std::isinf(w.mean)},
                                           {"median", json_number(w.median)},
                                           {"median_infinite", std::isinf(w.median)}};
            }
            methods.push_back({{"method", std::string(to_string(mc.method))},
                               {"covered", mc.covered},
                               {"reps", mc.reps},
                               {"coverage", mc.coverage},
                               {"measure_disagreements", mc.measure_disagreements},
                               {"widths", widths}});
        }
        rows.push_back({{"scenario", scenario_json(res.scenario)},
                        {"truncated", res.truncated},
                        {"truncation_rate", res.truncation_rate},
                        {"methods", methods}});
    }
    out["results"] = rows;
    return out;
}

// ---------------------------------------------------------------------------
// Measure summary table over the (β, τ) grid {0.2, 0.5, 0.8} × {0, 0.4, 0.8}
// ---------------------------------------------------------------------------

struct Table2Options {
    int reps = 1000;
    std::uint64_t seed = 2;
    int k = 10;
    int arm_size = 10;
    int threads = 1;
};

struct Table2Row {
    double beta = 0.0;
    double tau = 0.0;
    MeasureSummary summary;
};

inline constexpr double kTable2Betas[] = {0.2, 0.5, 0.8};
inline constexpr double kTable2Taus[] = {0.0, 0.4, 0.8};

[[nodiscard]] inline Scenario table2_scenario(const Table2Options& o, double beta, double tau) {
    Scenario sc;
    sc.name = detail::scenario_label("table2", beta, tau, o.k);
    sc.beta = beta;
    sc.tau = tau;
    sc.arm_sizes.assign(static_cast<std::size_t>(o.k), ArmSizes{o.arm_size, o.arm_size});
    sc.reps = o.reps;
    sc.seed = o.seed;
    return sc;
}

[[nodiscard]] inline std::vector<Table2Row> run_table2(const Table2Options& o) {
    std::vector<Table2Row> rows;
    for (double beta : kTable2Betas) {
        for (double tau : kTable2Taus) {
            rows.push_back({beta, tau, measure_summary(table2_scenario(o, beta, tau), o.threads)});
        }
    }
    return rows;
}

/// 9 settings × 4 measures rows; I² is reported in percent.
[[nodiscard]] inline std::string table2_csv(const std::vector<Table2Row>& rows,
                                            const Table2Options& o) {
    std::ostringstream os;
    os << "beta,tau,k,arm_size,reps,seed,measure,min,q1,median,q3,max\n";
    for (const auto& r : rows) {
        const std::pair<const char*, FiveNumber> parts[] = {
            {"I2", r.summary.i2}, {"CV_B", r.summary.cv_b}, {"M1", r.summary.m1}, {"M2", r.summary.m2}};
        for (const auto& [label, f] : parts) {
            const double scale = std::string_view(label) == "I2" ? 100.0 : 1.0;
            os << format6(r.beta) << ',' << format6(r.tau) << ',' << o.k << ',' << o.arm_size << ','
               << o.reps << ',' << o.seed << ',' << label << ',' << format6(scale * f.min) << ','
               << format6(scale * f.q1) << ',' << format6(scale * f.median) << ','
               << format6(scale * f.q3) << ',' << format6(scale * f.max) << '\n';
        }
    }
    return os.str();
}

}  // namespace hetcv
