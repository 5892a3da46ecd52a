#include "crl/saddle_flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace crl {

namespace {

double norm2(std::span<const double> x) {
    return std::sqrt(std::inner_product(x.begin(), x.end(), x.begin(), 0.0));
}

void require_finite(std::span<const double> x, const char* what) {
    for (double v : x)
        if (!std::isfinite(v)) throw NonFiniteDriftError(std::string("non-finite value in ") + what);
}

// Moves `x` to project(x + step * drift) and returns max |movement| / step.
double advance_block(const ConvexSet& set, Vec& x, const Vec& drift, double step) {
    Vec next(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) next[k] = x[k] + step * drift[k];
    set.project_in_place(next);
    double worst = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) worst = std::max(worst, std::abs(next[k] - x[k]));
    x.swap(next);
    return worst / step;
}

}  // namespace

void FlowConfig::validate() const {
    if (!(rho > 0.0)) throw std::invalid_argument("flow.rho must be positive");
    if (!(step > 0.0)) throw std::invalid_argument("flow.step must be positive");
    if (!(step < rho / 2.0)) throw std::invalid_argument("flow.step must be smaller than rho / 2");
    if (!(horizon > 0.0)) throw std::invalid_argument("flow.horizon must be positive");
    if (!(tol > 0.0)) throw std::invalid_argument("flow.tol must be positive");
    if (record_every == 0) throw std::invalid_argument("flow.record_every must be positive");
}

std::size_t FlowConfig::max_steps() const {
    return static_cast<std::size_t>(std::ceil(horizon / step - 1e-9));
}

FlowStepResult flow_step(const SaddlePointProblem& problem, const SaddleState& state, const FlowConfig& config) {
    const Vec gx = problem.grad_x(state.x, state.y);
    const Vec gy = problem.grad_y(state.x, state.y);
    require_finite(gx, "grad_x");
    require_finite(gy, "grad_y");
    const double inv_rho = 1.0 / config.rho;

    Vec dx(state.x.size()), dxh(state.x.size()), dy(state.y.size()), dyh(state.y.size());
    for (std::size_t k = 0; k < state.x.size(); ++k) {
        dx[k] = -gx[k] - inv_rho * (state.x[k] - state.x_hat[k]);
        dxh[k] = inv_rho * (state.x[k] - state.x_hat[k]);
    }
    for (std::size_t k = 0; k < state.y.size(); ++k) {
        dy[k] = gy[k] - inv_rho * (state.y[k] - state.y_hat[k]);
        dyh[k] = inv_rho * (state.y[k] - state.y_hat[k]);
    }

    FlowStepResult out;
    out.state.x = projected_step(problem.set_x, state.x, dx, config.step);
    out.state.x_hat = projected_step(problem.set_x, state.x_hat, dxh, config.step);
    out.state.y = projected_step(problem.set_y, state.y, dy, config.step);
    out.state.y_hat = projected_step(problem.set_y, state.y_hat, dyh, config.step);

    auto movement = [&](const Vec& next, const Vec& prev) {
        double worst = 0.0;
        for (std::size_t k = 0; k < next.size(); ++k) worst = std::max(worst, std::abs(next[k] - prev[k]));
        return worst / config.step;
    };
    out.drift_norm = std::max({movement(out.state.x, state.x), movement(out.state.x_hat, state.x_hat),
                               movement(out.state.y, state.y), movement(out.state.y_hat, state.y_hat)});
    return out;
}

FlowRun integrate(const SaddlePointProblem& problem, const SaddleState& state0, const FlowConfig& config) {
    config.validate();
    FlowRun run;
    run.final = state0;
    const std::size_t max_steps = config.max_steps();
    double drift = std::numeric_limits<double>::infinity();
    run.trajectory.push_back({0.0, state0, drift});
    for (std::size_t n = 0; n < max_steps; ++n) {
        FlowStepResult next = flow_step(problem, run.final, config);
        run.final = std::move(next.state);
        drift = next.drift_norm;
        run.steps = n + 1;
        const bool done = drift < config.tol;
        if (done || run.steps % config.record_every == 0 || run.steps == max_steps)
            run.trajectory.push_back({static_cast<double>(run.steps) * config.step, run.final, drift});
        if (done) {
            run.converged = true;
            break;
        }
    }
    return run;
}

std::vector<PlanarPoint> classical_primal_dual_demo(PlanarPoint start, double step, std::size_t n_steps) {
    std::vector<PlanarPoint> path;
    path.reserve(n_steps + 1);
    path.push_back(start);
    PlanarPoint p = start;
    for (std::size_t n = 0; n < n_steps; ++n) {
        // x' = -dL/dx = -y, y' = dL/dy = x
        p = {p.x - step * p.y, p.y + step * p.x};
        path.push_back(p);
    }
    return path;
}

SaddlePointProblem bilinear_problem(double bound) {
    return {[](const Vec&, const Vec& y) { return y; },
            [](const Vec& x, const Vec&) { return x; },
            ConvexSet::box(1, -bound, bound),
            ConvexSet::box(1, -bound, bound)};
}

CrlSets CrlSets::from_slack(const CmdpModel& model, double psi, double psi_cap) {
    const double effective = std::isfinite(psi) ? psi : psi_cap;
    const DualBounds bounds = scaled_dual_bounds(model, effective);
    std::optional<ConvexSet> mu;
    if (model.n_constraints() > 0) mu = ConvexSet::nonneg_l1_ball(model.n_constraints(), bounds.mu_l1_radius);
    return {ConvexSet::simplex(model.n_pairs()), std::move(mu),
            ConvexSet::box(model.n_states(), -bounds.v_linf_radius, bounds.v_linf_radius)};
}

CrlSaddleState CrlSaddleState::initial(const CmdpModel& model) {
    CrlSaddleState s;
    s.lambda.assign(model.n_pairs(), 1.0 / static_cast<double>(model.n_pairs()));
    s.lambda_hat = s.lambda;
    s.mu.assign(model.n_constraints(), 0.0);
    s.mu_hat = s.mu;
    s.v.assign(model.n_states(), 0.0);
    s.v_hat = s.v;
    return s;
}

bool CrlSaddleState::within(const CrlSets& sets, double tol) const {
    const bool mu_ok = !sets.mu || (sets.mu->contains(mu, tol) && sets.mu->contains(mu_hat, tol));
    return sets.lambda.contains(lambda, tol) && sets.lambda.contains(lambda_hat, tol) && mu_ok &&
           sets.v.contains(v, tol) && sets.v.contains(v_hat, tol);
}

CrlDrift crl_flow_field(const CmdpModel& model, const CrlSaddleState& state, double rho) {
    if (!(rho > 0.0)) throw std::invalid_argument("rho must be positive");
    const double inv_rho = 1.0 / rho;
    const std::size_t np = model.n_pairs();
    const std::size_t ni = model.n_constraints();
    const std::size_t ns = model.n_states();
    CrlDrift d;

    // lambda: r_a - (I - gamma P_a) v + sum_i mu_i g_a^i - (lambda - lambda_hat) / rho
    d.lambda = discounted_advantage_operator(model, state.v);
    auto r = model.reward_vector();
    for (std::size_t k = 0; k < np; ++k) {
        double value = r[k] - d.lambda[k];
        for (std::size_t i = 0; i < ni; ++i) value += state.mu[i] * model.constraint_vector(i)[k];
        d.lambda[k] = value - inv_rho * (state.lambda[k] - state.lambda_hat[k]);
    }
    d.lambda_hat.resize(np);
    for (std::size_t k = 0; k < np; ++k) d.lambda_hat[k] = inv_rho * (state.lambda[k] - state.lambda_hat[k]);

    // mu_i: h_i - g_i^T lambda - (mu_i - mu_hat_i) / rho
    const OccupancyValues values = value_of_occupancy(model, state.lambda);
    d.mu.resize(ni);
    d.mu_hat.resize(ni);
    for (std::size_t i = 0; i < ni; ++i) {
        d.mu[i] = model.thresholds()[i] - values.constraints[i] - inv_rho * (state.mu[i] - state.mu_hat[i]);
        d.mu_hat[i] = inv_rho * (state.mu[i] - state.mu_hat[i]);
    }

    // v: sum_a (I - gamma P_a^T) lambda_a - (1 - gamma) q - (v - v_hat) / rho
    d.v = flow_balance(model, state.lambda);
    d.v_hat.resize(ns);
    for (std::size_t s = 0; s < ns; ++s) {
        d.v[s] -= (1.0 - model.discount()) * model.initial_dist()[s] + inv_rho * (state.v[s] - state.v_hat[s]);
        d.v_hat[s] = inv_rho * (state.v[s] - state.v_hat[s]);
    }
    return d;
}

CrlStepResult crl_step(const CmdpModel& model, const CrlSets& sets, const CrlSaddleState& state, const FlowConfig& config) {
    const CrlDrift d = crl_flow_field(model, state, config.rho);
    require_finite(d.lambda, "lambda drift");
    require_finite(d.mu, "mu drift");
    require_finite(d.v, "v drift");

    CrlStepResult out{state, 0.0};
    CrlSaddleState& s = out.state;
    double drift = 0.0;
    drift = std::max(drift, advance_block(sets.lambda, s.lambda, d.lambda, config.step));
    drift = std::max(drift, advance_block(sets.lambda, s.lambda_hat, d.lambda_hat, config.step));
    if (sets.mu) {
        drift = std::max(drift, advance_block(*sets.mu, s.mu, d.mu, config.step));
        drift = std::max(drift, advance_block(*sets.mu, s.mu_hat, d.mu_hat, config.step));
    }
    drift = std::max(drift, advance_block(sets.v, s.v, d.v, config.step));
    drift = std::max(drift, advance_block(sets.v, s.v_hat, d.v_hat, config.step));
    out.drift_norm = drift;
    return out;
}

namespace {

CrlTrajectoryRow make_row(const CmdpModel& model, double time, const CrlSaddleState& s, double drift) {
    const OccupancyValues values = value_of_occupancy(model, s.lambda);
    return {time,
            norm2(s.lambda),
            norm2(s.mu),
            norm2(s.v),
            values.reward,
            values.constraints,
            bellman_flow_residual(model, s.lambda),
            drift};
}

}  // namespace

CrlRun crl_integrate(const CmdpModel& model,
                     const CrlSets& sets,
                     const CrlSaddleState& state0,
                     const FlowConfig& config,
                     const CrlObserver& observer) {
    config.validate();
    if (!state0.within(sets)) throw std::invalid_argument("crl_integrate: initial state lies outside the projection sets");

    CrlRun run;
    run.final = state0;
    const std::size_t max_steps = config.max_steps();
    run.trajectory.push_back(make_row(model, 0.0, state0, std::numeric_limits<double>::infinity()));
    if (observer) observer(0.0, state0);
    for (std::size_t n = 0; n < max_steps; ++n) {
        CrlStepResult next = crl_step(model, sets, run.final, config);
        run.final = std::move(next.state);
        run.steps = n + 1;
        const bool done = next.drift_norm < config.tol;
        if (done || run.steps % config.record_every == 0 || run.steps == max_steps) {
            const double time = static_cast<double>(run.steps) * config.step;
            run.trajectory.push_back(make_row(model, time, run.final, next.drift_norm));
            if (observer) observer(time, run.final);
        }
        if (done) {
            run.converged = true;
            break;
        }
    }
    return run;
}

}  // namespace crl
