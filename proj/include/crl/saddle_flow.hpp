#pragma once

#include "crl/cmdp.hpp"
#include "crl/geometry.hpp"

#include <cstddef>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

namespace crl {

/// Raised when a gradient callback or drift evaluates to a non-finite value.
class NonFiniteDriftError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// min over x in set_x, max over y in set_y of a convex-concave L(x, y).
struct SaddlePointProblem {
    std::function<Vec(const Vec& x, const Vec& y)> grad_x;
    std::function<Vec(const Vec& x, const Vec& y)> grad_y;
    ConvexSet set_x;
    ConvexSet set_y;
};

/// Primal/dual iterates plus their proximal anchors.
struct SaddleState {
    Vec x;
    Vec x_hat;
    Vec y;
    Vec y_hat;
};

struct FlowConfig {
    double rho = 1.0;
    double step = 1e-3;
    double horizon = 1e4;  // integration time
    double tol = 1e-7;     // on the projected drift, infinity norm
    std::size_t record_every = 1000;

    /// Throws std::invalid_argument on non-positive fields or step >= rho / 2.
    void validate() const;
    std::size_t max_steps() const;
};

struct FlowStepResult {
    SaddleState state;
    /// Infinity norm of (next - current) / step over all four blocks.
    double drift_norm = 0.0;
};

/// One projected forward-Euler step: descent in x, ascent in y, anchors relax toward their primals.
FlowStepResult flow_step(const SaddlePointProblem& problem, const SaddleState& state, const FlowConfig& config);

struct FlowSample {
    double time = 0.0;
    SaddleState state;
    double drift_norm = 0.0;
};

struct FlowRun {
    SaddleState final;
    std::vector<FlowSample> trajectory;
    bool converged = false;
    std::size_t steps = 0;
};

FlowRun integrate(const SaddlePointProblem& problem, const SaddleState& state0, const FlowConfig& config);

// -- bilinear example L(x, y) = x y ------------------------------------------

struct PlanarPoint {
    double x = 0.0;
    double y = 0.0;
};

/// Unregularized gradient descent-ascent on x y, forward Euler. Returns n_steps + 1 points.
std::vector<PlanarPoint> classical_primal_dual_demo(PlanarPoint start, double step, std::size_t n_steps);

/// L = x y with both variables boxed to [-bound, bound].
SaddlePointProblem bilinear_problem(double bound);

// -- constrained MDP dynamics -------------------------------------------------

/// Projection targets of the C-RL dynamics: joint simplex, capped nonnegative
/// L1 ball for mu (absent when there are no constraints) and a box for v.
struct CrlSets {
    ConvexSet lambda;
    std::optional<ConvexSet> mu;
    ConvexSet v;

    /// Radii from scaled_dual_bounds. psi = +inf (no constraints) is replaced by psi_cap.
    static CrlSets from_slack(const CmdpModel& model, double psi, double psi_cap = 1.0);
};

struct CrlSaddleState {
    Vec lambda;
    Vec lambda_hat;
    Vec mu;
    Vec mu_hat;
    Vec v;
    Vec v_hat;

    /// Uniform lambda, zero multipliers, anchors equal to their primals.
    static CrlSaddleState initial(const CmdpModel& model);
    bool within(const CrlSets& sets, double tol = 1e-9) const;
};

/// Pre-projection drifts of the six blocks, same shapes as CrlSaddleState.
struct CrlDrift {
    Vec lambda;
    Vec lambda_hat;
    Vec mu;
    Vec mu_hat;
    Vec v;
    Vec v_hat;
};

CrlDrift crl_flow_field(const CmdpModel& model, const CrlSaddleState& state, double rho);

struct CrlStepResult {
    CrlSaddleState state;
    double drift_norm = 0.0;
};

CrlStepResult crl_step(const CmdpModel& model, const CrlSets& sets, const CrlSaddleState& state, const FlowConfig& config);

struct CrlTrajectoryRow {
    double time = 0.0;
    double lambda_norm = 0.0;
    double mu_norm = 0.0;
    double v_norm = 0.0;
    double objective = 0.0;
    Vec constraints;
    double flow_residual = 0.0;
    double drift_norm = 0.0;
};

struct CrlRun {
    CrlSaddleState final;
    std::vector<CrlTrajectoryRow> trajectory;
    bool converged = false;
    std::size_t steps = 0;
};

/// Optional per-sample observer, called with the same cadence as trajectory rows.
using CrlObserver = std::function<void(double time, const CrlSaddleState&)>;

CrlRun crl_integrate(const CmdpModel& model,
                     const CrlSets& sets,
                     const CrlSaddleState& state0,
                     const FlowConfig& config,
                     const CrlObserver& observer = {});

}  // namespace crl
