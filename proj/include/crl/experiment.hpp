#pragma once

#include "crl/cmdp.hpp"
#include "crl/queue.hpp"
#include "crl/saddle_flow.hpp"
#include "crl/sgda.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

namespace crl {

/// Configuration problem; `key` is the dotted path of the offending entry.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string key, const std::string& message)
        : std::runtime_error(key.empty() ? message : key + ": " + message), key_(std::move(key)) {}
    const std::string& key() const { return key_; }

private:
    std::string key_;
};

enum class SolverSelection { Exact, Flow, Sgda, DemoBilinear, All };

std::string_view to_string(SolverSelection solver);
SolverSelection parse_solver(std::string_view text);

struct SgdaSettings {
    StepSchedule schedule;
    double rho = 1.0;
    std::uint64_t budget = 2'000'000;
    std::uint64_t stride = 10'000;
    std::uint64_t seed = 1;
    /// Number of seeds run in parallel (seed, seed + 1, ...); the first one feeds sgda_metrics.csv.
    std::uint64_t sweep = 1;
    bool literal_lambda_hat = false;
};

struct ExperimentConfig {
    /// Exactly one of these is set; a queue model is the default.
    std::optional<QueueConfig> queue;
    std::optional<std::filesystem::path> model_path;

    SolverSelection solver = SolverSelection::All;
    FlowConfig flow;
    SgdaSettings sgda;
    /// Stand-in for an infinite Slater slack when the model has no constraints.
    double psi_cap = 1.0;
    std::filesystem::path output_dir = "crl_out";
};

/// Strict JSON parsing: unknown keys and out-of-range values raise ConfigError.
/// Relative model paths resolve against `base_dir`.
ExperimentConfig parse_config_text(const std::string& text, const std::filesystem::path& base_dir = {});
ExperimentConfig parse_config(const std::filesystem::path& path);

/// Multi-line description of every config key and its default, for --help.
std::string config_reference();

/// CMDP file: keys n_states, n_actions, gamma, q, P[a][s][s'], r[s][a], g[i][s][a], h[i].
CmdpModel load_cmdp_file(const std::filesystem::path& path);
CmdpModel parse_cmdp_text(const std::string& text);
std::string cmdp_to_text(const CmdpModel& model);

CmdpModel build_model(const ExperimentConfig& config);

enum class ExitCode : int { Ok = 0, Internal = 1, Config = 2, Infeasible = 3, SlaterFails = 4 };

struct ExperimentOutcome {
    ExitCode code = ExitCode::Ok;
    /// Single-line JSON diagnostic when code != Ok.
    std::string error_line;
    std::vector<std::filesystem::path> written;
};

/// Builds the model, solves the LP reference, runs the selected solvers and
/// writes CSV artifacts into config.output_dir. Files are written to a temporary
/// name and renamed only after all requested solvers finished.
ExperimentOutcome run_experiment(const ExperimentConfig& config);

/// Model and reference checks without running any iterative solver.
ExperimentOutcome validate_experiment(const ExperimentConfig& config, std::string& report);

}  // namespace crl
