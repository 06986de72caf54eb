// hetcv command-line tool: analyze, simulate, table2.
//
// Exit codes: 0 success, 2 input error, 3 numeric failure.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "hetcv/hetcv.hpp"

namespace {

constexpr int kExitInput = 2;
constexpr int kExitNumeric = 3;

struct AnalyzeArgs {
    std::string input;
    std::string methods = "propimp,alpha-adj,wald";
    double alpha = 0.05;
    std::string format = "json";
    std::string smd = "hedges";
};

struct SimulateArgs {
    std::string config;
    std::optional<int> reps;
    std::optional<std::uint64_t> seed;
    int threads = 1;
    std::string out;
};

int run_analyze(const AnalyzeArgs& a) {
    const hetcv::SmdCorrection corr =
        a.smd == "cohen" ? hetcv::SmdCorrection::None : hetcv::SmdCorrection::Hedges;
    const hetcv::MetaDataset data = hetcv::read_studies_csv_file(a.input, corr);

    hetcv::AnalysisOptions opts;
    opts.methods = hetcv::parse_method_list(a.methods);
    opts.alpha = a.alpha;

    hetcv::Provenance prov;
    prov.input_path = a.input;
    prov.smd = a.smd;
    const hetcv::AnalysisReport report = hetcv::analyze(data, opts, prov);

    if (a.format == "csv") {
        std::cout << hetcv::report_csv(report);
    } else if (a.format == "text") {
        std::cout << hetcv::report_text(report);
    } else {
        std::cout << hetcv::json(report).dump(2) << '\n';
    }
    if (a.format != "text") {
        for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
    }
    return 0;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw hetcv::InputError("cannot write " + path.string());
    out << content;
}

int run_simulate(const SimulateArgs& a) {
    hetcv::SimulationConfig cfg = hetcv::load_simulation_config(a.config);
    hetcv::apply_overrides(cfg, a.reps, a.seed);

    std::vector<hetcv::CoverageResult> results;
    results.reserve(cfg.scenarios.size());
    for (const auto& sc : cfg.scenarios) {
        results.push_back(hetcv::run_scenario(sc, a.threads));
        std::cerr << "done: " << sc.name << '\n';
    }

    const std::string csv = hetcv::coverage_csv(results);
    if (a.out.empty()) {
        std::cout << csv;
        return 0;
    }
    const std::filesystem::path dir(a.out);
    std::filesystem::create_directories(dir);
    write_file(dir / (cfg.name + ".csv"), csv);
    write_file(dir / (cfg.name + ".json"), hetcv::coverage_json(cfg, results).dump(2) + "\n");
    return 0;
}

int cmd_table2(const hetcv::Table2Options& o) {
    std::cout << hetcv::table2_csv(hetcv::run_table2(o), o);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Heterogeneity measures CV_B, M1, M2 for random-effects meta-analysis"};
    app.set_version_flag("--version", std::string(hetcv::kVersion));
    app.require_subcommand(1);

    AnalyzeArgs aa;
    auto* analyze = app.add_subcommand("analyze", "Fit a random-effects model and report intervals");
    analyze->add_option("--input", aa.input, "CSV with yi,vi or m1,sd1,n1,m2,sd2,n2 columns")
        ->required();
    analyze->add_option("--method", aa.methods,
                        "Comma-separated interval methods: propimp, alpha-adj, wald, both, "
                        "fixed-tau, fixed-beta")
        ->capture_default_str();
    analyze->add_option("--alpha", aa.alpha, "Overall level")->capture_default_str();
    analyze->add_option("--format", aa.format, "Output format")
        ->check(CLI::IsMember({"json", "csv", "text"}))
        ->capture_default_str();
    analyze->add_option("--smd", aa.smd, "SMD estimator for two-arm input")
        ->check(CLI::IsMember({"hedges", "cohen"}))
        ->capture_default_str();

    SimulateArgs sa;
    auto* simulate = app.add_subcommand("simulate", "Run a coverage simulation from a config file");
    simulate->add_option("--config", sa.config, "Scenario config (JSON)")->required();
    simulate->add_option("--reps", sa.reps, "Override replicates per scenario")
        ->check(CLI::PositiveNumber);
    simulate->add_option("--seed", sa.seed, "Override the seed");
    simulate->add_option("--threads", sa.threads, "Worker threads")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    simulate->add_option("--out", sa.out, "Directory for <name>.csv and <name>.json");

    hetcv::Table2Options to;
    auto* table2 = app.add_subcommand("table2", "Summaries of I2, CV_B, M1, M2 over a (beta, tau) grid");
    table2->add_option("--reps", to.reps, "Replicates per setting")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    table2->add_option("--seed", to.seed, "Seed")->capture_default_str();
    table2->add_option("--arm-size", to.arm_size, "Observations per arm")
        ->check(CLI::Range(2, 1000000))
        ->capture_default_str();
    table2->add_option("--k", to.k, "Studies per meta-analysis")
        ->check(CLI::Range(2, 1000000))
        ->capture_default_str();
    table2->add_option("--threads", to.threads, "Worker threads")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitInput;
    }

    try {
        if (*analyze) {
            if (!(aa.alpha > 0.0 && aa.alpha < 1.0)) {
                throw hetcv::InputError("--alpha must lie in (0, 1)");
            }
            return run_analyze(aa);
        }
        if (*simulate) return run_simulate(sa);
        if (*table2) return cmd_table2(to);
    } catch (const hetcv::InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const hetcv::NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const hetcv::DomainError& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
    }
    return 0;
}
