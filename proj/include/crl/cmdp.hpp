#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace crl {

using Vec = std::vector<double>;

/// Occupancy measure over state-action pairs, stored as stacked per-action
/// columns: entry `a * n_states + s` holds lambda(s, a).
using OccupancyMeasure = Vec;

/// Raised when a model, policy or occupancy measure violates its invariants.
class ModelError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/**
 * Tabular constrained MDP.
 *
 * Rewards are maximized and every constraint reads
 * E[(1-gamma) sum_t gamma^t g_i(s_t, a_t)] >= h_i.
 * The constructor validates stochasticity of P and q (tolerance 1e-12) and
 * finiteness of all rewards, and throws ModelError naming the offending entry.
 */
class CmdpModel {
public:
    /// transition[a][s][s'], reward[s][a], constraint_rewards[i][s][a].
    CmdpModel(std::vector<std::vector<Vec>> transition,
              std::vector<Vec> reward,
              std::vector<std::vector<Vec>> constraint_rewards,
              Vec thresholds,
              double discount,
              Vec initial_dist);

    std::size_t n_states() const { return n_states_; }
    std::size_t n_actions() const { return n_actions_; }
    std::size_t n_constraints() const { return thresholds_.size(); }
    std::size_t n_pairs() const { return n_states_ * n_actions_; }

    /// Position of (s, a) in an occupancy-shaped vector.
    std::size_t pair_index(std::size_t s, std::size_t a) const { return a * n_states_ + s; }

    double transition(std::size_t a, std::size_t s, std::size_t next) const {
        return transition_[(a * n_states_ + s) * n_states_ + next];
    }
    /// Distribution P(. | s, a).
    std::span<const double> transition_row(std::size_t a, std::size_t s) const {
        return {transition_.data() + (a * n_states_ + s) * n_states_, n_states_};
    }

    double reward(std::size_t s, std::size_t a) const { return reward_[pair_index(s, a)]; }
    double constraint_reward(std::size_t i, std::size_t s, std::size_t a) const {
        return constraint_rewards_[i][pair_index(s, a)];
    }

    /// Rewards laid out like an occupancy measure.
    std::span<const double> reward_vector() const { return reward_; }
    std::span<const double> constraint_vector(std::size_t i) const { return constraint_rewards_[i]; }

    const Vec& thresholds() const { return thresholds_; }
    double discount() const { return discount_; }
    const Vec& initial_dist() const { return initial_dist_; }

private:
    std::size_t n_states_;
    std::size_t n_actions_;
    Vec transition_;
    Vec reward_;
    std::vector<Vec> constraint_rewards_;
    Vec thresholds_;
    double discount_;
    Vec initial_dist_;
};

/// Stationary randomized policy, pi(a | s) stored row-major by state.
class Policy {
public:
    Policy(std::size_t n_states, std::size_t n_actions, Vec probabilities);

    static Policy uniform(std::size_t n_states, std::size_t n_actions);

    std::size_t n_states() const { return n_states_; }
    std::size_t n_actions() const { return n_actions_; }
    double operator()(std::size_t s, std::size_t a) const { return probs_[s * n_actions_ + a]; }
    std::span<const double> row(std::size_t s) const {
        return {probs_.data() + s * n_actions_, n_actions_};
    }

private:
    std::size_t n_states_;
    std::size_t n_actions_;
    Vec probs_;
};

struct DualVariables {
    Vec mu;
    Vec v;
};

struct SlaterCertificate {
    double slack = 0.0;
    OccupancyMeasure witness;
};

struct OccupancyValues {
    double reward = 0.0;
    Vec constraints;
};

struct DualBounds {
    double mu_l1_radius = 0.0;
    double v_linf_radius = 0.0;
};

/// True when lambda is entrywise nonnegative and sums to one within tol.
bool is_occupancy_measure(std::span<const double> lambda, double tol = 1e-9);

/// pi(a|s) = lambda(s,a) / sum_a' lambda(s,a'); states with marginal <= 1e-12 get the uniform row.
Policy occupancy_to_policy(std::size_t n_states, std::size_t n_actions, std::span<const double> lambda);

/// Discounted, (1-gamma)-normalized state-action visitation of pi started from q.
OccupancyMeasure policy_to_occupancy(const CmdpModel& model, const Policy& pi);

OccupancyValues value_of_occupancy(const CmdpModel& model, std::span<const double> lambda);

/// sum_a (I - gamma P_a^T) lambda_a, one entry per state.
Vec flow_balance(const CmdpModel& model, std::span<const double> lambda);

/// || sum_a (I - gamma P_a^T) lambda_a - (1-gamma) q ||_inf
double bellman_flow_residual(const CmdpModel& model, std::span<const double> lambda);

/// Entry (a*S + s) holds ((I - gamma P_a) v)(s).
Vec discounted_advantage_operator(const CmdpModel& model, std::span<const double> v);

double lagrangian(const CmdpModel& model, std::span<const double> lambda, const DualVariables& duals);

/// Lagrangian plus proximal terms: convex in (mu, v), concave in lambda.
double augmented_lagrangian(const CmdpModel& model,
                            std::span<const double> lambda,
                            std::span<const double> lambda_hat,
                            const DualVariables& duals,
                            const DualVariables& duals_hat,
                            double rho);

/// Multiplier radii for unit-range rewards: (2/psi, 1/(1-gamma) + 2/((1-gamma) psi)).
DualBounds dual_bounds(double gamma, double psi);

/// max(1, max|r|, max|g|).
double reward_scale(const CmdpModel& model);

/// dual_bounds applied to the model rescaled into the unit reward range, then mapped back.
/// With scale c: (2c/psi, c/(1-gamma) + 2c^2/((1-gamma) psi)). psi = +inf gives a zero mu radius.
DualBounds scaled_dual_bounds(const CmdpModel& model, double psi);

}  // namespace crl
