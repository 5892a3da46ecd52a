#include "crl/experiment.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <iostream>

namespace {

int fail(crl::ExitCode code, const std::string& line) {
    std::cerr << line << "\n";
    return static_cast<int>(code);
}

std::string config_error_line(const crl::ConfigError& e) {
    nlohmann::json j;
    j["error"] = "config";
    if (!e.key().empty()) j["key"] = e.key();
    j["message"] = e.what();
    return j.dump();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Constrained RL: LP reference, regularized saddle flow and stochastic primal-dual solver"};
    app.require_subcommand(1);
    app.footer(crl::config_reference());

    std::string config_path;
    std::string solver;
    std::uint64_t seed = 0;
    std::string out_dir;

    CLI::App* run = app.add_subcommand("run", "Run the selected solvers and write CSV artifacts");
    run->add_option("--config", config_path, "JSON config file")->required()->check(CLI::ExistingFile);
    run->add_option("--solver", solver, "exact|flow|sgda|demo-bilinear|all (overrides the config)");
    CLI::Option* seed_opt = run->add_option("--seed", seed, "SGDA seed (overrides sgda.seed)");
    run->add_option("--out", out_dir, "Output directory (overrides output.dir)");

    CLI::App* validate = app.add_subcommand("validate", "Check the config and model, report LP and Slater status");
    validate->add_option("--config", config_path, "JSON config file")->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : static_cast<int>(crl::ExitCode::Config);
    }

    crl::ExperimentConfig config;
    try {
        config = crl::parse_config(config_path);
        if (!solver.empty()) config.solver = crl::parse_solver(solver);
        if (*seed_opt) config.sgda.seed = seed;
        if (!out_dir.empty()) config.output_dir = out_dir;
    } catch (const crl::ConfigError& e) {
        return fail(crl::ExitCode::Config, config_error_line(e));
    }

    if (*validate) {
        std::string report;
        const crl::ExperimentOutcome outcome = crl::validate_experiment(config, report);
        if (!report.empty()) std::cout << report << "\n";
        if (outcome.code != crl::ExitCode::Ok) return fail(outcome.code, outcome.error_line);
        return 0;
    }

    const crl::ExperimentOutcome outcome = crl::run_experiment(config);
    if (outcome.code != crl::ExitCode::Ok) return fail(outcome.code, outcome.error_line);
    for (const auto& path : outcome.written) std::cout << path.string() << "\n";
    return 0;
}
