#include "crl/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace crl {

std::string_view to_string(LpStatus status) {
    switch (status) {
        case LpStatus::Optimal: return "optimal";
        case LpStatus::Infeasible: return "infeasible";
        case LpStatus::Unbounded: return "unbounded";
    }
    return "unknown";
}

SimplexSolver::SimplexSolver(const StandardFormLp& lp, SimplexOptions options)
    : lp_(lp), options_(options), m_(lp.rows), n_(lp.cols), width_(lp.cols + lp.rows + 1) {
    if (lp.a.size() != m_ * n_ || lp.b.size() != m_ || lp.c.size() != n_)
        throw std::invalid_argument("StandardFormLp dimensions are inconsistent");
    for (double x : lp.a)
        if (!std::isfinite(x)) throw std::invalid_argument("StandardFormLp has a non-finite coefficient");
    for (double x : lp.b)
        if (!std::isfinite(x)) throw std::invalid_argument("StandardFormLp has a non-finite right-hand side");
    for (double x : lp.c)
        if (!std::isfinite(x)) throw std::invalid_argument("StandardFormLp has a non-finite objective coefficient");

    tableau_.assign(m_ * width_, 0.0);
    row_sign_.assign(m_, 1.0);
    basis_.resize(m_);
    for (std::size_t i = 0; i < m_; ++i) {
        row_sign_[i] = lp.b[i] < 0.0 ? -1.0 : 1.0;
        for (std::size_t j = 0; j < n_; ++j) cell(i, j) = row_sign_[i] * lp.at(i, j);
        cell(i, n_ + i) = 1.0;
        cell(i, width_ - 1) = row_sign_[i] * lp.b[i];
        basis_[i] = n_ + i;
    }
}

void SimplexSolver::load_objective(const Vec& costs) {
    reduced_ = costs;
    objective_ = 0.0;
    for (std::size_t i = 0; i < m_; ++i) {
        const double cb = costs[basis_[i]];
        if (cb == 0.0) continue;
        for (std::size_t j = 0; j + 1 < width_; ++j) reduced_[j] -= cb * cell(i, j);
        objective_ += cb * cell(i, width_ - 1);
    }
}

void SimplexSolver::pivot(std::size_t row, std::size_t col) {
    const double inv = 1.0 / cell(row, col);
    for (std::size_t j = 0; j < width_; ++j) cell(row, j) *= inv;
    cell(row, col) = 1.0;
    for (std::size_t i = 0; i < m_; ++i) {
        if (i == row) continue;
        const double factor = cell(i, col);
        if (factor == 0.0) continue;
        for (std::size_t j = 0; j < width_; ++j) cell(i, j) -= factor * cell(row, j);
        cell(i, col) = 0.0;
        if (std::abs(cell(i, width_ - 1)) < options_.pivot_tol * 1e-3) cell(i, width_ - 1) = 0.0;
    }
    const double dc = reduced_[col];
    if (dc != 0.0) {
        for (std::size_t j = 0; j + 1 < width_; ++j) reduced_[j] -= dc * cell(row, j);
        reduced_[col] = 0.0;
        objective_ += dc * cell(row, width_ - 1);
    }
    basis_[row] = col;
    if (++iterations_ > options_.max_iterations)
        throw IterationLimitError("simplex exceeded " + std::to_string(options_.max_iterations) + " pivots");
}

SimplexSolver::PhaseResult SimplexSolver::run_phase(bool allow_artificials) {
    const std::size_t candidates = allow_artificials ? n_ + m_ : n_;
    for (;;) {
        // Bland: lowest-index improving column
        std::size_t entering = candidates;
        for (std::size_t j = 0; j < candidates; ++j) {
            if (reduced_[j] > options_.pivot_tol) {
                entering = j;
                break;
            }
        }
        if (entering == candidates) return PhaseResult::Optimal;

        std::size_t leaving = m_;
        double best_ratio = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < m_; ++i) {
            const double coef = cell(i, entering);
            if (coef <= options_.pivot_tol) continue;
            const double ratio = std::max(cell(i, width_ - 1), 0.0) / coef;
            const double tie = 1e-12 * (1.0 + std::abs(best_ratio));
            if (leaving == m_ || ratio < best_ratio - tie ||
                (ratio <= best_ratio + tie && basis_[i] < basis_[leaving])) {
                best_ratio = ratio;
                leaving = i;
            }
        }
        if (leaving == m_) return PhaseResult::Unbounded;
        pivot(leaving, entering);
    }
}

LpSolution SimplexSolver::solve() {
    if (solved_) throw std::logic_error("SimplexSolver instances solve exactly once");
    solved_ = true;

    LpSolution out;

    // phase one: maximize -sum(artificials)
    Vec phase_one(n_ + m_, 0.0);
    std::fill(phase_one.begin() + static_cast<std::ptrdiff_t>(n_), phase_one.end(), -1.0);
    load_objective(phase_one);
    run_phase(false);

    double b_scale = 1.0;
    for (double x : lp_.b) b_scale = std::max(b_scale, std::abs(x));
    if (objective_ < -1e-9 * b_scale) {
        out.status = LpStatus::Infeasible;
        out.iterations = iterations_;
        return out;
    }

    // push zero-level artificials out of the basis; rows with no structural
    // entry left are redundant and keep their artificial pinned at zero
    for (std::size_t i = 0; i < m_; ++i) {
        if (basis_[i] < n_) continue;
        std::size_t best = n_;
        double best_abs = options_.pivot_tol;
        for (std::size_t j = 0; j < n_; ++j) {
            if (std::abs(cell(i, j)) > best_abs) {
                best_abs = std::abs(cell(i, j));
                best = j;
            }
        }
        if (best < n_) {
            pivot(i, best);
        } else {
            for (std::size_t j = 0; j < n_; ++j) cell(i, j) = 0.0;
            cell(i, width_ - 1) = 0.0;
        }
    }

    Vec phase_two(n_ + m_, 0.0);
    std::copy(lp_.c.begin(), lp_.c.end(), phase_two.begin());
    load_objective(phase_two);
    if (run_phase(false) == PhaseResult::Unbounded) {
        out.status = LpStatus::Unbounded;
        out.iterations = iterations_;
        return out;
    }

    out.status = LpStatus::Optimal;
    out.x.assign(n_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) {
        if (basis_[i] >= n_) continue;
        double value = cell(i, width_ - 1);
        if (value < 0.0 && value > -options_.pivot_tol) value = 0.0;
        out.x[basis_[i]] = value;
    }
    out.objective = 0.0;
    for (std::size_t j = 0; j < n_; ++j) out.objective += lp_.c[j] * out.x[j];
    out.duals.resize(m_);
    for (std::size_t i = 0; i < m_; ++i) out.duals[i] = -row_sign_[i] * reduced_[n_ + i];
    out.iterations = iterations_;
    return out;
}

LpSolution simplex_solve(const StandardFormLp& lp, SimplexOptions options) {
    SimplexSolver solver(lp, options);
    return solver.solve();
}

namespace {

// Flow-balance and normalization rows shared by the main and Slater LPs.
// Rows [0, S) are flow, row `norm_row` is sum(lambda) = 1.
void fill_flow_rows(const CmdpModel& model, StandardFormLp& lp, std::size_t norm_row) {
    const std::size_t ns = model.n_states();
    const double gamma = model.discount();
    for (std::size_t a = 0; a < model.n_actions(); ++a) {
        for (std::size_t s = 0; s < ns; ++s) {
            const std::size_t col = model.pair_index(s, a);
            lp.at(s, col) += 1.0;
            auto row = model.transition_row(a, s);
            for (std::size_t next = 0; next < ns; ++next) lp.at(next, col) -= gamma * row[next];
            lp.at(norm_row, col) = 1.0;
        }
    }
    for (std::size_t s = 0; s < ns; ++s) lp.b[s] = (1.0 - gamma) * model.initial_dist()[s];
    lp.b[norm_row] = 1.0;
}

OccupancyMeasure normalized_occupancy(const Vec& x, std::size_t n_pairs) {
    OccupancyMeasure lambda(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(n_pairs));
    double total = 0.0;
    for (double& v : lambda) {
        v = std::max(v, 0.0);
        total += v;
    }
    for (double& v : lambda) v /= total;
    return lambda;
}

}  // namespace

StandardFormLp build_cmdp_lp(const CmdpModel& model) {
    const std::size_t ns = model.n_states();
    const std::size_t ni = model.n_constraints();
    const std::size_t np = model.n_pairs();
    StandardFormLp lp(ns + ni + 1, np + ni);
    fill_flow_rows(model, lp, ns + ni);
    for (std::size_t i = 0; i < ni; ++i) {
        auto g = model.constraint_vector(i);
        for (std::size_t k = 0; k < np; ++k) lp.at(ns + i, k) = g[k];
        lp.at(ns + i, np + i) = -1.0;
        lp.b[ns + i] = model.thresholds()[i];
    }
    auto r = model.reward_vector();
    std::copy(r.begin(), r.end(), lp.c.begin());
    return lp;
}

ExactSolution solve_cmdp_exact(const CmdpModel& model) {
    const std::size_t ns = model.n_states();
    const std::size_t ni = model.n_constraints();
    const LpSolution sol = simplex_solve(build_cmdp_lp(model));

    ExactSolution out;
    out.status = sol.status;
    if (sol.status != LpStatus::Optimal) return out;

    out.lambda = normalized_occupancy(sol.x, model.n_pairs());
    out.objective = value_of_occupancy(model, out.lambda).reward;
    out.mu.resize(ni);
    for (std::size_t i = 0; i < ni; ++i) out.mu[i] = std::max(0.0, -sol.duals[ns + i]);
    // sum_s flow_row_s = (1 - gamma) * norm_row, so the normalization multiplier
    // is a uniform shift of v
    const double shift = sol.duals[ns + ni] / (1.0 - model.discount());
    out.v.resize(ns);
    for (std::size_t s = 0; s < ns; ++s) out.v[s] = sol.duals[s] + shift;
    return out;
}

SlaterResult slater_slack(const CmdpModel& model) {
    const std::size_t ns = model.n_states();
    const std::size_t ni = model.n_constraints();
    const std::size_t np = model.n_pairs();

    SlaterResult out;
    if (ni == 0) {
        out.status = SlaterStatus::Holds;
        out.certificate.slack = std::numeric_limits<double>::infinity();
        out.certificate.witness = policy_to_occupancy(model, Policy::uniform(ns, model.n_actions()));
        return out;
    }

    // columns: lambda | psi+ | psi- | surplus_i
    StandardFormLp lp(ns + ni + 1, np + 2 + ni);
    fill_flow_rows(model, lp, ns + ni);
    for (std::size_t i = 0; i < ni; ++i) {
        auto g = model.constraint_vector(i);
        for (std::size_t k = 0; k < np; ++k) lp.at(ns + i, k) = g[k];
        lp.at(ns + i, np) = -1.0;
        lp.at(ns + i, np + 1) = 1.0;
        lp.at(ns + i, np + 2 + i) = -1.0;
        lp.b[ns + i] = model.thresholds()[i];
    }
    lp.c[np] = 1.0;
    lp.c[np + 1] = -1.0;

    const LpSolution sol = simplex_solve(lp);
    if (sol.status != LpStatus::Optimal)
        throw std::runtime_error("Slater auxiliary LP returned " + std::string(to_string(sol.status)));
    out.certificate.slack = sol.x[np] - sol.x[np + 1];
    out.certificate.witness = normalized_occupancy(sol.x, np);
    out.status = out.certificate.slack > 1e-9 ? SlaterStatus::Holds : SlaterStatus::Fails;
    return out;
}

}  // namespace crl
