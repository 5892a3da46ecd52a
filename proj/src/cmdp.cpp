#include "crl/cmdp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace crl {

namespace {

constexpr double kStochasticTol = 1e-12;

std::string where(const char* what, std::size_t i, std::size_t j) {
    std::ostringstream out;
    out << what << "[" << i << "][" << j << "]";
    return out.str();
}

void check_distribution(std::span<const double> p, const std::string& name) {
    double sum = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        if (!std::isfinite(p[k]) || p[k] < 0.0) {
            std::ostringstream out;
            out << name << " has invalid entry " << p[k] << " at index " << k;
            throw ModelError(out.str());
        }
        sum += p[k];
    }
    if (std::abs(sum - 1.0) > kStochasticTol) {
        std::ostringstream out;
        out.precision(17);
        out << name << " sums to " << sum << ", expected 1";
        throw ModelError(out.str());
    }
}

}  // namespace

CmdpModel::CmdpModel(std::vector<std::vector<Vec>> transition,
                     std::vector<Vec> reward,
                     std::vector<std::vector<Vec>> constraint_rewards,
                     Vec thresholds,
                     double discount,
                     Vec initial_dist)
    : n_states_(initial_dist.size()),
      n_actions_(transition.size()),
      thresholds_(std::move(thresholds)),
      discount_(discount),
      initial_dist_(std::move(initial_dist)) {
    if (n_states_ == 0) throw ModelError("model needs at least one state");
    if (n_actions_ == 0) throw ModelError("model needs at least one action");
    if (!(discount_ > 0.0 && discount_ < 1.0)) throw ModelError("discount must lie in (0, 1)");
    if (constraint_rewards.size() != thresholds_.size())
        throw ModelError("number of constraint reward tables differs from number of thresholds");

    check_distribution(initial_dist_, "q");

    transition_.resize(n_actions_ * n_states_ * n_states_);
    for (std::size_t a = 0; a < n_actions_; ++a) {
        if (transition[a].size() != n_states_) throw ModelError("P[a] must have n_states rows");
        for (std::size_t s = 0; s < n_states_; ++s) {
            if (transition[a][s].size() != n_states_) throw ModelError("P[a][s] must have n_states entries");
            check_distribution(transition[a][s], where("P", a, s));
            std::copy(transition[a][s].begin(), transition[a][s].end(),
                      transition_.begin() + static_cast<std::ptrdiff_t>((a * n_states_ + s) * n_states_));
        }
    }

    auto flatten = [this](const std::vector<Vec>& table, const char* name) {
        if (table.size() != n_states_) throw ModelError(std::string(name) + " must have n_states rows");
        Vec flat(n_pairs());
        for (std::size_t s = 0; s < n_states_; ++s) {
            if (table[s].size() != n_actions_) throw ModelError(std::string(name) + " rows must have n_actions entries");
            for (std::size_t a = 0; a < n_actions_; ++a) {
                if (!std::isfinite(table[s][a])) throw ModelError(where(name, s, a) + " is not finite");
                flat[pair_index(s, a)] = table[s][a];
            }
        }
        return flat;
    };

    reward_ = flatten(reward, "r");
    for (std::size_t i = 0; i < constraint_rewards.size(); ++i) {
        constraint_rewards_.push_back(flatten(constraint_rewards[i], ("g" + std::to_string(i)).c_str()));
        if (!std::isfinite(thresholds_[i])) throw ModelError("threshold h[" + std::to_string(i) + "] is not finite");
    }
}

Policy::Policy(std::size_t n_states, std::size_t n_actions, Vec probabilities)
    : n_states_(n_states), n_actions_(n_actions), probs_(std::move(probabilities)) {
    if (probs_.size() != n_states_ * n_actions_) throw ModelError("policy table has wrong size");
    for (std::size_t s = 0; s < n_states_; ++s) check_distribution(row(s), "pi[" + std::to_string(s) + "]");
}

Policy Policy::uniform(std::size_t n_states, std::size_t n_actions) {
    return Policy(n_states, n_actions, Vec(n_states * n_actions, 1.0 / static_cast<double>(n_actions)));
}

bool is_occupancy_measure(std::span<const double> lambda, double tol) {
    double sum = 0.0;
    for (double x : lambda) {
        if (!(x >= 0.0)) return false;
        sum += x;
    }
    return std::abs(sum - 1.0) <= tol;
}

Policy occupancy_to_policy(std::size_t n_states, std::size_t n_actions, std::span<const double> lambda) {
    if (lambda.size() != n_states * n_actions) throw ModelError("occupancy measure has wrong size");
    Vec probs(n_states * n_actions);
    for (std::size_t s = 0; s < n_states; ++s) {
        double marginal = 0.0;
        for (std::size_t a = 0; a < n_actions; ++a) marginal += lambda[a * n_states + s];
        for (std::size_t a = 0; a < n_actions; ++a) {
            probs[s * n_actions + a] = marginal > 1e-12 ? lambda[a * n_states + s] / marginal
                                                        : 1.0 / static_cast<double>(n_actions);
        }
        // re-close the row so it passes the strict stochasticity check
        double row_sum = 0.0;
        for (std::size_t a = 0; a < n_actions; ++a) row_sum += probs[s * n_actions + a];
        for (std::size_t a = 0; a < n_actions; ++a) probs[s * n_actions + a] /= row_sum;
    }
    return Policy(n_states, n_actions, std::move(probs));
}

OccupancyMeasure policy_to_occupancy(const CmdpModel& model, const Policy& pi) {
    const std::size_t ns = model.n_states();
    const std::size_t na = model.n_actions();
    if (pi.n_states() != ns || pi.n_actions() != na) throw ModelError("policy shape does not match model");
    const double gamma = model.discount();

    // (I - gamma P_pi^T) d = (1 - gamma) q
    Eigen::MatrixXd system = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(ns), static_cast<Eigen::Index>(ns));
    for (std::size_t s = 0; s < ns; ++s) {
        for (std::size_t a = 0; a < na; ++a) {
            const double w = pi(s, a);
            if (w == 0.0) continue;
            auto row = model.transition_row(a, s);
            for (std::size_t next = 0; next < ns; ++next)
                system(static_cast<Eigen::Index>(next), static_cast<Eigen::Index>(s)) -= gamma * w * row[next];
        }
    }
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(ns));
    for (std::size_t s = 0; s < ns; ++s) rhs(static_cast<Eigen::Index>(s)) = (1.0 - gamma) * model.initial_dist()[s];
    Eigen::VectorXd d = system.partialPivLu().solve(rhs);
    if (!d.allFinite()) throw std::runtime_error("policy_to_occupancy: singular flow system");

    OccupancyMeasure lambda(model.n_pairs());
    for (std::size_t s = 0; s < ns; ++s) {
        const double ds = std::max(0.0, d(static_cast<Eigen::Index>(s)));
        for (std::size_t a = 0; a < na; ++a) lambda[model.pair_index(s, a)] = ds * pi(s, a);
    }
    return lambda;
}

OccupancyValues value_of_occupancy(const CmdpModel& model, std::span<const double> lambda) {
    OccupancyValues out;
    auto r = model.reward_vector();
    out.reward = std::inner_product(lambda.begin(), lambda.end(), r.begin(), 0.0);
    out.constraints.resize(model.n_constraints());
    for (std::size_t i = 0; i < model.n_constraints(); ++i) {
        auto g = model.constraint_vector(i);
        out.constraints[i] = std::inner_product(lambda.begin(), lambda.end(), g.begin(), 0.0);
    }
    return out;
}

Vec flow_balance(const CmdpModel& model, std::span<const double> lambda) {
    const std::size_t ns = model.n_states();
    const double gamma = model.discount();
    Vec out(ns, 0.0);
    for (std::size_t a = 0; a < model.n_actions(); ++a) {
        for (std::size_t s = 0; s < ns; ++s) {
            const double mass = lambda[model.pair_index(s, a)];
            if (mass == 0.0) continue;
            out[s] += mass;
            auto row = model.transition_row(a, s);
            for (std::size_t next = 0; next < ns; ++next) out[next] -= gamma * mass * row[next];
        }
    }
    return out;
}

double bellman_flow_residual(const CmdpModel& model, std::span<const double> lambda) {
    Vec balance = flow_balance(model, lambda);
    double worst = 0.0;
    for (std::size_t s = 0; s < balance.size(); ++s)
        worst = std::max(worst, std::abs(balance[s] - (1.0 - model.discount()) * model.initial_dist()[s]));
    return worst;
}

Vec discounted_advantage_operator(const CmdpModel& model, std::span<const double> v) {
    const std::size_t ns = model.n_states();
    Vec out(model.n_pairs());
    for (std::size_t a = 0; a < model.n_actions(); ++a) {
        for (std::size_t s = 0; s < ns; ++s) {
            auto row = model.transition_row(a, s);
            const double expected = std::inner_product(row.begin(), row.end(), v.begin(), 0.0);
            out[model.pair_index(s, a)] = v[s] - model.discount() * expected;
        }
    }
    return out;
}

double lagrangian(const CmdpModel& model, std::span<const double> lambda, const DualVariables& duals) {
    const OccupancyValues values = value_of_occupancy(model, lambda);
    double total = values.reward;
    for (std::size_t i = 0; i < model.n_constraints(); ++i)
        total += duals.mu[i] * (values.constraints[i] - model.thresholds()[i]);
    const auto& q = model.initial_dist();
    total += (1.0 - model.discount()) * std::inner_product(q.begin(), q.end(), duals.v.begin(), 0.0);
    const Vec advantage = discounted_advantage_operator(model, duals.v);
    total -= std::inner_product(lambda.begin(), lambda.end(), advantage.begin(), 0.0);
    return total;
}

namespace {

double squared_distance(std::span<const double> x, std::span<const double> y) {
    double total = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) total += (x[k] - y[k]) * (x[k] - y[k]);
    return total;
}

}  // namespace

double augmented_lagrangian(const CmdpModel& model,
                            std::span<const double> lambda,
                            std::span<const double> lambda_hat,
                            const DualVariables& duals,
                            const DualVariables& duals_hat,
                            double rho) {
    if (!(rho > 0.0)) throw std::invalid_argument("rho must be positive");
    const double scale = 0.5 / rho;
    return scale * squared_distance(duals.v, duals_hat.v) + scale * squared_distance(duals.mu, duals_hat.mu) +
           lagrangian(model, lambda, duals) - scale * squared_distance(lambda, lambda_hat);
}

DualBounds dual_bounds(double gamma, double psi) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("discount must lie in (0, 1)");
    if (!(psi > 0.0)) throw std::invalid_argument("Slater slack must be positive");
    return {2.0 / psi, 1.0 / (1.0 - gamma) + 2.0 / ((1.0 - gamma) * psi)};
}

double reward_scale(const CmdpModel& model) {
    double scale = 1.0;
    for (double x : model.reward_vector()) scale = std::max(scale, std::abs(x));
    for (std::size_t i = 0; i < model.n_constraints(); ++i)
        for (double x : model.constraint_vector(i)) scale = std::max(scale, std::abs(x));
    return scale;
}

DualBounds scaled_dual_bounds(const CmdpModel& model, double psi) {
    const double c = reward_scale(model);
    const DualBounds unit = dual_bounds(model.discount(), psi / c);
    return {unit.mu_l1_radius, c * unit.v_linf_radius};
}

}  // namespace crl
