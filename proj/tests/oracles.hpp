#pragma once

// Independent reference computations used only by the tests. Nothing here calls
// into the code under test except for the model accessors.

#include "crl/cmdp.hpp"
#include "crl/geometry.hpp"
#include "crl/lp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

namespace oracle {

using crl::Vec;
using Rng = std::mt19937_64;

inline double unif(Rng& rng, double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Vec random_distribution(Rng& rng, std::size_t n, double zero_prob = 0.0) {
    Vec p(n);
    double total = 0.0;
    for (auto& x : p) {
        x = unif(rng) < zero_prob ? 0.0 : -std::log(1.0 - unif(rng));
        total += x;
    }
    if (total == 0.0) {
        p[std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)] = 1.0;
        return p;
    }
    for (auto& x : p) x /= total;
    // push rounding into the largest entry so rows sum to one within 1e-15
    const double drift = 1.0 - std::accumulate(p.begin(), p.end(), 0.0);
    *std::max_element(p.begin(), p.end()) += drift;
    return p;
}

inline crl::Policy random_policy(Rng& rng, std::size_t ns, std::size_t na, double zero_prob = 0.0) {
    Vec probs;
    for (std::size_t s = 0; s < ns; ++s) {
        const Vec row = random_distribution(rng, na, zero_prob);
        probs.insert(probs.end(), row.begin(), row.end());
    }
    return crl::Policy(ns, na, probs);
}

// Discounted state distribution of pi by power iteration, independent of the LU-based code path.
inline Vec state_occupancy_by_iteration(const crl::CmdpModel& m, const crl::Policy& pi) {
    const std::size_t ns = m.n_states();
    const double g = m.discount();
    Vec d(ns, 0.0);
    Vec term = m.initial_dist();
    double weight = 1.0 - g;
    for (int t = 0; t < 100000; ++t) {
        double mass = 0.0;
        for (std::size_t s = 0; s < ns; ++s) {
            d[s] += weight * term[s];
            mass += term[s];
        }
        if (weight * mass < 1e-17) break;
        Vec next(ns, 0.0);
        for (std::size_t s = 0; s < ns; ++s)
            for (std::size_t a = 0; a < m.n_actions(); ++a)
                for (std::size_t s2 = 0; s2 < ns; ++s2) next[s2] += term[s] * pi(s, a) * m.transition(a, s, s2);
        term = next;
        weight *= g;
    }
    return d;
}

inline Vec occupancy_by_iteration(const crl::CmdpModel& m, const crl::Policy& pi) {
    const Vec d = state_occupancy_by_iteration(m, pi);
    Vec lambda(m.n_pairs());
    for (std::size_t s = 0; s < m.n_states(); ++s)
        for (std::size_t a = 0; a < m.n_actions(); ++a) lambda[m.pair_index(s, a)] = d[s] * pi(s, a);
    return lambda;
}

struct ValueIterationResult {
    Vec value;                      // unnormalized optimal values V*(s)
    std::vector<std::size_t> greedy;  // argmax action per state
    double normalized_objective;    // (1 - gamma) <q, V*>
};

inline ValueIterationResult value_iteration(const crl::CmdpModel& m, double tol = 1e-13) {
    const std::size_t ns = m.n_states();
    const double g = m.discount();
    Vec v(ns, 0.0);
    std::vector<std::size_t> greedy(ns, 0);
    for (int it = 0; it < 1000000; ++it) {
        Vec next(ns, -std::numeric_limits<double>::infinity());
        for (std::size_t s = 0; s < ns; ++s)
            for (std::size_t a = 0; a < m.n_actions(); ++a) {
                double q = m.reward(s, a);
                for (std::size_t s2 = 0; s2 < ns; ++s2) q += g * m.transition(a, s, s2) * v[s2];
                if (q > next[s]) {
                    next[s] = q;
                    greedy[s] = a;
                }
            }
        double diff = 0.0;
        for (std::size_t s = 0; s < ns; ++s) diff = std::max(diff, std::abs(next[s] - v[s]));
        v = next;
        if (diff < tol) break;
    }
    double obj = 0.0;
    for (std::size_t s = 0; s < ns; ++s) obj += m.initial_dist()[s] * v[s];
    return {v, greedy, (1.0 - g) * obj};
}

inline std::size_t draw(const Vec& p, Rng& rng) {
    double u = unif(rng);
    for (std::size_t k = 0; k < p.size(); ++k) {
        if (u < p[k]) return k;
        u -= p[k];
    }
    for (std::size_t k = p.size(); k-- > 0;)
        if (p[k] > 0.0) return k;
    return 0;
}

struct MonteCarloEstimate {
    double mean;
    double standard_error;
};

// (1 - gamma) * sum_t gamma^t r(s_t, a_t), truncated where gamma^T < 1e-10.
inline MonteCarloEstimate rollout_return(const crl::CmdpModel& m, const crl::Policy& pi, std::size_t episodes, Rng& rng) {
    const double g = m.discount();
    const auto horizon = static_cast<std::size_t>(std::ceil(std::log(1e-10) / std::log(g)));
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t e = 0; e < episodes; ++e) {
        std::size_t s = draw(m.initial_dist(), rng);
        double total = 0.0, weight = 1.0 - g;
        for (std::size_t t = 0; t < horizon; ++t) {
            const auto row = pi.row(s);
            const std::size_t a = draw(Vec(row.begin(), row.end()), rng);
            total += weight * m.reward(s, a);
            const auto trow = m.transition_row(a, s);
            s = draw(Vec(trow.begin(), trow.end()), rng);
            weight *= g;
        }
        sum += total;
        sum_sq += total * total;
    }
    const double n = static_cast<double>(episodes);
    const double mean = sum / n;
    const double var = std::max(0.0, sum_sq / n - mean * mean);
    return {mean, std::sqrt(var / n)};
}

// Lagrangian summed from scratch in (s, a, s') loops.
inline double lagrangian_by_loops(const crl::CmdpModel& m, const Vec& lambda, const Vec& mu, const Vec& v) {
    const std::size_t ns = m.n_states(), na = m.n_actions();
    const double g = m.discount();
    long double total = 0.0L;
    for (std::size_t s = 0; s < ns; ++s) total += (1.0L - g) * m.initial_dist()[s] * v[s];
    for (std::size_t i = 0; i < m.n_constraints(); ++i) total -= static_cast<long double>(mu[i]) * m.thresholds()[i];
    for (std::size_t a = 0; a < na; ++a)
        for (std::size_t s = 0; s < ns; ++s) {
            const long double l = lambda[a * ns + s];
            long double inner = m.reward(s, a) - v[s];
            for (std::size_t s2 = 0; s2 < ns; ++s2) inner += static_cast<long double>(g) * m.transition(a, s, s2) * v[s2];
            for (std::size_t i = 0; i < m.n_constraints(); ++i)
                inner += static_cast<long double>(mu[i]) * m.constraint_reward(i, s, a);
            total += l * inner;
        }
    return static_cast<double>(total);
}

inline double sq_dist(const Vec& a, const Vec& b) {
    long double t = 0.0L;
    for (std::size_t k = 0; k < a.size(); ++k) t += static_cast<long double>(a[k] - b[k]) * (a[k] - b[k]);
    return static_cast<double>(t);
}

// Grid minimization of ||z - y||^2 over {z >= 0, sum z = radius} (equality) or
// {z >= 0, sum z <= radius}. Coarse-to-fine: each level searches a window of
// +-2 cells of the previous level at a tenth of the spacing. Final spacing is `resolution`.
inline Vec grid_project(const Vec& y, double radius, bool equality, double resolution) {
    const std::size_t n = y.size();
    const std::size_t free_dims = equality ? n - 1 : n;
    Vec lo(free_dims, 0.0), hi(free_dims, radius);
    double h = radius / 20.0;
    Vec best;
    double best_val = std::numeric_limits<double>::infinity();
    while (true) {
        std::vector<long> counts(free_dims);
        for (std::size_t k = 0; k < free_dims; ++k) counts[k] = std::lround((hi[k] - lo[k]) / h);
        std::vector<long> idx(free_dims, 0);
        Vec z(n);
        Vec level_best;
        double level_val = std::numeric_limits<double>::infinity();
        while (true) {
            double sum = 0.0;
            bool ok = true;
            for (std::size_t k = 0; k < free_dims; ++k) {
                z[k] = lo[k] + static_cast<double>(idx[k]) * h;
                if (z[k] < -1e-15) ok = false;
                sum += z[k];
            }
            if (equality) {
                z[n - 1] = radius - sum;
                if (z[n - 1] < -1e-12) ok = false;
            } else if (sum > radius + 1e-12) {
                ok = false;
            }
            if (ok) {
                const double val = sq_dist(z, y);
                if (val < level_val) {
                    level_val = val;
                    level_best = z;
                }
            }
            std::size_t k = 0;
            while (k < free_dims && ++idx[k] > counts[k]) idx[k++] = 0;
            if (k == free_dims) break;
        }
        if (level_val < best_val) {
            best_val = level_val;
            best = level_best;
        }
        if (h <= resolution * (1.0 + 1e-9)) break;
        for (std::size_t k = 0; k < free_dims; ++k) {
            lo[k] = std::max(0.0, best[k] - 2.0 * h);
            hi[k] = std::min(radius, best[k] + 2.0 * h);
        }
        h = std::max(resolution, h / 10.0);
        for (std::size_t k = 0; k < free_dims; ++k) lo[k] = std::floor(lo[k] / h) * h;
    }
    return best;
}

// Best objective over all basic feasible solutions of max c^T x, A x = b, x >= 0.
struct VertexResult {
    bool feasible = false;
    double objective = -std::numeric_limits<double>::infinity();
};

inline VertexResult enumerate_vertices(const crl::StandardFormLp& lp) {
    const std::size_t m = lp.rows, n = lp.cols;
    VertexResult out;
    std::vector<bool> pick(n, false);
    std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(m), true);
    do {
        std::vector<std::size_t> cols;
        for (std::size_t j = 0; j < n; ++j)
            if (pick[j]) cols.push_back(j);
        Eigen::MatrixXd B(m, m);
        Eigen::VectorXd rhs(m);
        for (std::size_t i = 0; i < m; ++i) {
            rhs(static_cast<Eigen::Index>(i)) = lp.b[i];
            for (std::size_t k = 0; k < m; ++k)
                B(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = lp.at(i, cols[k]);
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(B);
        if (lu.rank() < static_cast<Eigen::Index>(m)) continue;
        const Eigen::VectorXd xb = lu.solve(rhs);
        if ((xb.array() < -1e-10).any()) continue;
        double obj = 0.0;
        for (std::size_t k = 0; k < m; ++k) obj += lp.c[cols[k]] * xb(static_cast<Eigen::Index>(k));
        out.feasible = true;
        out.objective = std::max(out.objective, obj);
    } while (std::prev_permutation(pick.begin(), pick.end()));
    return out;
}

// Random tabular CMDP with rewards in [0, 1], constraint rewards in [-1, 1] and
// thresholds set `margin` below the constraint value of a random policy.
inline crl::CmdpModel random_cmdp(Rng& rng, std::size_t ns, std::size_t na, std::size_t ni, double gamma, double margin = 0.1) {
    std::vector<std::vector<Vec>> P(na, std::vector<Vec>(ns));
    for (auto& block : P)
        for (auto& row : block) row = random_distribution(rng, ns, 0.3);
    std::vector<Vec> r(ns, Vec(na));
    for (auto& row : r)
        for (auto& x : row) x = unif(rng);
    std::vector<std::vector<Vec>> g(ni, std::vector<Vec>(ns, Vec(na)));
    for (auto& gi : g)
        for (auto& row : gi)
            for (auto& x : row) x = unif(rng, -1.0, 1.0);
    const Vec q = random_distribution(rng, ns);
    crl::CmdpModel probe(P, r, g, Vec(ni, 0.0), gamma, q);
    const Vec lam = occupancy_by_iteration(probe, random_policy(rng, ns, na));
    Vec h(ni);
    for (std::size_t i = 0; i < ni; ++i) {
        double val = 0.0;
        for (std::size_t k = 0; k < lam.size(); ++k) val += lam[k] * probe.constraint_vector(i)[k];
        h[i] = val - margin;
    }
    return crl::CmdpModel(P, r, g, h, gamma, q);
}

// 99% chi-square critical values by degrees of freedom.
inline double chi_square_99(std::size_t dof) {
    static const double table[] = {0.0, 6.635, 9.210, 11.345, 13.277, 15.086, 16.812};
    return table[std::min<std::size_t>(dof, 6)];
}

}  // namespace oracle
