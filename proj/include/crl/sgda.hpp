#pragma once

#include "crl/cmdp.hpp"
#include "crl/geometry.hpp"
#include "crl/saddle_flow.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace crl {

using Rng = std::mt19937_64;

/// Uniform draw in [0, 1) with 53 random bits; identical across standard libraries.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

struct RewardSample {
    double reward = 0.0;
    Vec constraints;
};

/**
 * Sampling access to an environment. The learner only sees draws from q and
 * P(. | s, a) plus the reward signals; the discount and the constraint
 * thresholds are part of the problem statement and are exposed here too.
 */
class GenerativeModel {
public:
    virtual ~GenerativeModel() = default;

    virtual std::size_t n_states() const = 0;
    virtual std::size_t n_actions() const = 0;
    virtual std::size_t n_constraints() const = 0;
    virtual double discount() const = 0;
    virtual const Vec& thresholds() const = 0;

    virtual std::size_t sample_initial(Rng& rng) const = 0;
    virtual std::size_t sample_transition(std::size_t s, std::size_t a, Rng& rng) const = 0;
    virtual RewardSample rewards(std::size_t s, std::size_t a) const = 0;
};

/// Generative model backed by an explicit CMDP (inverse-CDF sampling).
class ModelSampler final : public GenerativeModel {
public:
    explicit ModelSampler(CmdpModel model);

    std::size_t n_states() const override { return model_.n_states(); }
    std::size_t n_actions() const override { return model_.n_actions(); }
    std::size_t n_constraints() const override { return model_.n_constraints(); }
    double discount() const override { return model_.discount(); }
    const Vec& thresholds() const override { return model_.thresholds(); }

    std::size_t sample_initial(Rng& rng) const override;
    std::size_t sample_transition(std::size_t s, std::size_t a, Rng& rng) const override;
    RewardSample rewards(std::size_t s, std::size_t a) const override;

    const CmdpModel& model() const { return model_; }

private:
    CmdpModel model_;
    Vec initial_cdf_;
    Vec transition_cdf_;
};

/// Distribution xi over state-action pairs in occupancy layout.
class SamplingDistribution {
public:
    SamplingDistribution(std::size_t n_states, std::size_t n_actions, Vec xi);
    static SamplingDistribution uniform(std::size_t n_states, std::size_t n_actions);

    std::size_t n_states() const { return n_states_; }
    std::size_t n_actions() const { return n_actions_; }
    double probability(std::size_t pair) const { return xi_[pair]; }
    const Vec& values() const { return xi_; }
    /// Index into the occupancy layout.
    std::size_t sample(Rng& rng) const;

private:
    std::size_t n_states_;
    std::size_t n_actions_;
    Vec xi_;
    Vec cdf_;
};

/// alpha_n = a0 / (n0 + n)^kappa with kappa in (0.5, 1].
struct StepSchedule {
    double a0 = 0.5;
    double n0 = 10.0;
    double kappa = 0.6;

    void validate() const;
    double alpha(std::uint64_t n) const;
};

struct SgdaState {
    CrlSaddleState blocks;
    std::uint64_t n = 0;
    std::uint64_t seed = 0;
    Rng rng;

    static SgdaState initial(const GenerativeModel& gen, std::uint64_t seed);
};

struct SgdaOptions {
    double rho = 1.0;
    /// Use the anchor update for lambda_hat without the step factor, as
    /// printed in the original algorithm listing.
    bool literal_lambda_hat = false;
    /// Check set membership of every block after every step (throws on failure).
    bool verify_sets = false;
};

/// One draw (s0, (s, a), s') shared by all six block updates.
struct SampleTriple {
    std::size_t s0 = 0;
    std::size_t pair = 0;
    std::size_t s = 0;
    std::size_t a = 0;
    std::size_t next = 0;
};

SampleTriple draw_sample(const GenerativeModel& gen, const SamplingDistribution& xi, Rng& rng);

/// Single-sample importance-weighted estimate of the Lagrangian at (lambda, mu, v).
double estimate_lagrangian(const GenerativeModel& gen,
                           const SamplingDistribution& xi,
                           std::span<const double> lambda,
                           std::span<const double> mu,
                           std::span<const double> v,
                           Rng& rng);

/// Pre-projection increments for all six blocks (already multiplied by alpha).
CrlDrift sgda_increment(const GenerativeModel& gen,
                        const SamplingDistribution& xi,
                        const CrlSaddleState& state,
                        const SampleTriple& sample,
                        double alpha,
                        const SgdaOptions& options);

/// Draws a sample from state.rng, applies the increments and projects every block.
void sgda_step(const GenerativeModel& gen,
               const SamplingDistribution& xi,
               SgdaState& state,
               const StepSchedule& schedule,
               const SgdaOptions& options,
               const CrlSets& sets);

struct SgdaMetrics {
    std::uint64_t n = 0;
    double alpha = 0.0;
    double objective = 0.0;
    Vec constraints;
    double lambda_gap_inf = 0.0;
    double mu_norm = 0.0;
    double v_norm = 0.0;
};

/// Measurement hooks that use the true model; the learner never reads them.
struct SgdaDiagnostics {
    const CmdpModel* model = nullptr;
    const OccupancyMeasure* reference_lambda = nullptr;
};

struct SgdaRun {
    SgdaState final;
    std::vector<SgdaMetrics> timeline;
};

/// Runs `budget` steps, recording metrics every `stride` steps and after the last one.
SgdaRun run_sgda(const GenerativeModel& gen,
                 const SamplingDistribution& xi,
                 SgdaState state0,
                 const StepSchedule& schedule,
                 const SgdaOptions& options,
                 const CrlSets& sets,
                 std::uint64_t budget,
                 std::uint64_t stride,
                 const SgdaDiagnostics& diagnostics = {});

}  // namespace crl
