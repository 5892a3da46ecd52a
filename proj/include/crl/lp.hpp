#pragma once

#include "crl/cmdp.hpp"

#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string_view>

namespace crl {

/// maximize c^T x subject to A x = b, x >= 0. A is row-major.
struct StandardFormLp {
    std::size_t rows = 0;
    std::size_t cols = 0;
    Vec a;
    Vec b;
    Vec c;

    StandardFormLp() = default;
    StandardFormLp(std::size_t m, std::size_t n) : rows(m), cols(n), a(m * n, 0.0), b(m, 0.0), c(n, 0.0) {}

    double& at(std::size_t i, std::size_t j) { return a[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return a[i * cols + j]; }
};

enum class LpStatus { Optimal, Infeasible, Unbounded };

std::string_view to_string(LpStatus status);

struct LpSolution {
    LpStatus status = LpStatus::Infeasible;
    Vec x;
    double objective = 0.0;
    /// Simplex multipliers y with A^T y >= c at optimality (one per row).
    Vec duals;
    std::size_t iterations = 0;
};

class IterationLimitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SimplexOptions {
    double pivot_tol = 1e-9;
    std::size_t max_iterations = 1'000'000;
};

/**
 * Dense two-phase primal simplex with Bland's smallest-index rule.
 *
 * Phase one drives one artificial per row to zero; artificials that remain
 * basic on redundant rows stay at level zero and are barred from re-entering.
 * The tableau keeps the artificial columns, which carry B^{-1}, so the row
 * multipliers are read from the final reduced costs. Holds mutable state:
 * one solve per instance.
 */
class SimplexSolver {
public:
    explicit SimplexSolver(const StandardFormLp& lp, SimplexOptions options = {});

    LpSolution solve();

private:
    enum class PhaseResult { Optimal, Unbounded };

    PhaseResult run_phase(bool allow_artificials);
    void pivot(std::size_t row, std::size_t col);
    void load_objective(const Vec& costs);
    double& cell(std::size_t i, std::size_t j) { return tableau_[i * width_ + j]; }

    const StandardFormLp& lp_;
    SimplexOptions options_;
    std::size_t m_;
    std::size_t n_;
    std::size_t width_;  // n structural + m artificial + rhs
    Vec tableau_;
    Vec reduced_;  // reduced costs over structural and artificial columns
    double objective_ = 0.0;
    std::vector<std::size_t> basis_;
    std::vector<double> row_sign_;
    std::size_t iterations_ = 0;
    bool solved_ = false;
};

LpSolution simplex_solve(const StandardFormLp& lp, SimplexOptions options = {});

/**
 * Occupancy-measure LP. Columns: the n_pairs entries of lambda followed by one
 * surplus per constraint. Rows: one flow-balance row per state, one row per
 * constraint (g_i^T lambda - surplus_i = h_i), then the normalization row.
 */
StandardFormLp build_cmdp_lp(const CmdpModel& model);

struct ExactSolution {
    LpStatus status = LpStatus::Infeasible;
    OccupancyMeasure lambda;
    double objective = 0.0;
    Vec mu;
    /// Flow multipliers with the normalization-row multiplier folded in.
    Vec v;
};

/// Exact optimal occupancy measure and Lagrangian multipliers.
ExactSolution solve_cmdp_exact(const CmdpModel& model);

enum class SlaterStatus { Holds, Fails };

struct SlaterResult {
    SlaterStatus status = SlaterStatus::Fails;
    SlaterCertificate certificate;
};

/// Largest uniform margin psi with g_i^T lambda >= h_i + psi over valid occupancy
/// measures. psi = +inf when the model has no constraints.
SlaterResult slater_slack(const CmdpModel& model);

}  // namespace crl
