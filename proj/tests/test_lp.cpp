#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "crl/lp.hpp"
#include "crl/queue.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

#include <cmath>

using crl::LpStatus;
using crl::StandardFormLp;
using crl::Vec;
using fixture::max_abs_diff;

namespace {

void check_certificates(const StandardFormLp& lp, const crl::LpSolution& sol) {
    for (std::size_t i = 0; i < lp.rows; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < lp.cols; ++j) row += lp.at(i, j) * sol.x[j];
        CHECK(std::abs(row - lp.b[i]) <= 1e-9);
    }
    double dual_obj = 0.0;
    for (std::size_t i = 0; i < lp.rows; ++i) dual_obj += lp.b[i] * sol.duals[i];
    CHECK(std::abs(dual_obj - sol.objective) <= 1e-9 * std::max(1.0, std::abs(sol.objective)));
    for (std::size_t j = 0; j < lp.cols; ++j) {
        CHECK(sol.x[j] >= -1e-12);
        double col = 0.0;
        for (std::size_t i = 0; i < lp.rows; ++i) col += lp.at(i, j) * sol.duals[i];
        CHECK(col >= lp.c[j] - 1e-9);
    }
}

}  // namespace

TEST_CASE("simplex examples") {
    SUBCASE("single equality") {
        StandardFormLp lp(1, 2);
        lp.at(0, 0) = lp.at(0, 1) = 1.0;
        lp.b = {1.0};
        lp.c = {1.0, 0.0};
        const auto sol = crl::simplex_solve(lp);
        REQUIRE(sol.status == LpStatus::Optimal);
        CHECK(sol.x == Vec{1.0, 0.0});
        CHECK(sol.objective == 1.0);
        check_certificates(lp, sol);
    }
    SUBCASE("unbounded") {
        // x1 + s = 1, x2 free to grow
        StandardFormLp lp(1, 3);
        lp.at(0, 0) = 1.0;
        lp.at(0, 2) = 1.0;
        lp.b = {1.0};
        lp.c = {1.0, 1.0, 0.0};
        CHECK(crl::simplex_solve(lp).status == LpStatus::Unbounded);
    }
    SUBCASE("infeasible") {
        StandardFormLp lp(1, 2);
        lp.at(0, 0) = lp.at(0, 1) = 1.0;
        lp.b = {-1.0};
        CHECK(crl::simplex_solve(lp).status == LpStatus::Infeasible);
    }
    SUBCASE("redundant rows") {
        StandardFormLp lp(2, 2);
        lp.at(0, 0) = lp.at(0, 1) = 1.0;
        lp.at(1, 0) = lp.at(1, 1) = 2.0;
        lp.b = {1.0, 2.0};
        lp.c = {0.0, 3.0};
        const auto sol = crl::simplex_solve(lp);
        REQUIRE(sol.status == LpStatus::Optimal);
        CHECK(sol.objective == doctest::Approx(3.0));
        check_certificates(lp, sol);
    }
    SUBCASE("iteration cap is an explicit failure") {
        StandardFormLp lp(1, 2);
        lp.at(0, 0) = lp.at(0, 1) = 1.0;
        lp.b = {1.0};
        lp.c = {1.0, 0.0};
        CHECK_THROWS_AS(crl::simplex_solve(lp, {1e-9, 0}), crl::IterationLimitError);
    }
    SUBCASE("malformed input") {
        StandardFormLp lp(1, 2);
        lp.b = {std::nan("")};
        CHECK_THROWS(crl::simplex_solve(lp));
    }
    SUBCASE("one solve per instance") {
        StandardFormLp lp(1, 1);
        lp.at(0, 0) = 1.0;
        lp.b = {1.0};
        crl::SimplexSolver solver(lp);
        solver.solve();
        CHECK_THROWS_AS(solver.solve(), std::logic_error);
    }
}

TEST_CASE("random 3x5 LPs match vertex enumeration") {
    oracle::Rng rng(17);
    int compared = 0;
    for (int trial = 0; trial < 300; ++trial) {
        StandardFormLp lp(3, 5);
        Vec x0(5);
        for (auto& x : x0) x = oracle::unif(rng) < 0.3 ? 0.0 : oracle::unif(rng, 0.0, 2.0);
        for (std::size_t j = 0; j < 5; ++j) {
            lp.at(0, j) = oracle::unif(rng, 0.1, 1.0);  // bounds the feasible region
            lp.at(1, j) = oracle::unif(rng, -1.0, 1.0);
            lp.at(2, j) = oracle::unif(rng, -1.0, 1.0);
            lp.c[j] = oracle::unif(rng, -1.0, 1.0);
        }
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 5; ++j) lp.b[i] += lp.at(i, j) * x0[j];
        const auto sol = crl::simplex_solve(lp);
        const auto ref = oracle::enumerate_vertices(lp);
        REQUIRE(ref.feasible);
        REQUIRE(sol.status == LpStatus::Optimal);
        CHECK(std::abs(sol.objective - ref.objective) <= 1e-8);
        check_certificates(lp, sol);
        ++compared;
    }
    CHECK(compared == 300);
}

TEST_CASE("random infeasible LPs are reported") {
    oracle::Rng rng(19);
    for (int trial = 0; trial < 50; ++trial) {
        StandardFormLp lp(2, 4);
        for (std::size_t j = 0; j < 4; ++j) {
            lp.at(0, j) = oracle::unif(rng, 0.1, 1.0);
            lp.at(1, j) = -lp.at(0, j) * oracle::unif(rng, 0.5, 2.0);
        }
        lp.b = {1.0, 0.5};  // row 1 needs a negative combination of nonnegative x
        CHECK(crl::simplex_solve(lp).status == LpStatus::Infeasible);
        CHECK(!oracle::enumerate_vertices(lp).feasible);
    }
}

TEST_CASE("build_cmdp_lp shapes") {
    const auto single = crl::build_cmdp_lp(fixture::single_state(2.5, 0.5));
    CHECK(single.cols == 1);
    CHECK(single.rows == 2);
    const auto sol = crl::simplex_solve(single);
    REQUIRE(sol.status == LpStatus::Optimal);
    CHECK(sol.x[0] == doctest::Approx(1.0));
    CHECK(sol.objective == doctest::Approx(2.5));

    const auto product = crl::build_cmdp_lp(fixture::queue());
    CHECK(product.cols == 125 + 2);
    CHECK(product.rows == 5 + 2 + 1);

    crl::QueueConfig paired;
    paired.action_mode = crl::ActionMode::Paired;
    const auto diag = crl::build_cmdp_lp(crl::build_queue_cmdp(paired));
    CHECK(diag.cols == 25 + 2);
}

TEST_CASE("unconstrained models agree with value iteration") {
    oracle::Rng rng(23);
    for (int trial = 0; trial < 20; ++trial) {
        const auto m = oracle::random_cmdp(rng, 4, 3, 0, 0.85);
        const auto vi = oracle::value_iteration(m);
        const auto exact = crl::solve_cmdp_exact(m);
        REQUIRE(exact.status == LpStatus::Optimal);
        CHECK(exact.objective == doctest::Approx(vi.normalized_objective).epsilon(1e-9));

        Vec greedy(4 * 3, 0.0);
        for (std::size_t s = 0; s < 4; ++s) greedy[s * 3 + vi.greedy[s]] = 1.0;
        const Vec lambda_vi = crl::policy_to_occupancy(m, crl::Policy(4, 3, greedy));
        CHECK(max_abs_diff(exact.lambda, lambda_vi) <= 1e-8);
        // v* is the optimal value function scaled back into the normalized objective
        CHECK(max_abs_diff(exact.v, vi.value) <= 1e-7);
    }
}

TEST_CASE("very loose thresholds recover the unconstrained optimum") {
    oracle::Rng rng(29);
    for (int trial = 0; trial < 10; ++trial) {
        const auto base = oracle::random_cmdp(rng, 3, 3, 1, 0.9);
        std::vector<std::vector<Vec>> P(3, std::vector<Vec>(3));
        std::vector<Vec> r(3, Vec(3));
        std::vector<std::vector<Vec>> g(1, std::vector<Vec>(3, Vec(3)));
        for (std::size_t a = 0; a < 3; ++a)
            for (std::size_t s = 0; s < 3; ++s) {
                auto row = base.transition_row(a, s);
                P[a][s].assign(row.begin(), row.end());
                r[s][a] = base.reward(s, a);
                g[0][s][a] = base.constraint_reward(0, s, a);
            }
        const crl::CmdpModel loose(P, r, g, {-1e6}, 0.9, base.initial_dist());
        const auto exact = crl::solve_cmdp_exact(loose);
        REQUIRE(exact.status == LpStatus::Optimal);
        CHECK(exact.objective == doctest::Approx(oracle::value_iteration(loose).normalized_objective).epsilon(1e-9));
        CHECK(exact.mu[0] == doctest::Approx(0.0));
    }
}

TEST_CASE("queue reference solution") {
    const auto m = fixture::queue();
    const auto exact = crl::solve_cmdp_exact(m);
    REQUIRE(exact.status == LpStatus::Optimal);
    CHECK(exact.objective == doctest::Approx(2.9944786678).epsilon(1e-9));
    CHECK(crl::bellman_flow_residual(m, exact.lambda) <= 1e-8);
    CHECK(crl::is_occupancy_measure(exact.lambda, 1e-12));
    const auto values = crl::value_of_occupancy(m, exact.lambda);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(values.constraints[i] >= m.thresholds()[i] - 1e-8);
        CHECK(exact.mu[i] >= 0.0);
        CHECK(std::abs(exact.mu[i] * (values.constraints[i] - m.thresholds()[i])) <= 1e-7);
    }
    CHECK(std::abs(crl::lagrangian(m, exact.lambda, {exact.mu, exact.v}) - exact.objective) <= 1e-7);

    // dual feasibility: no pair has positive reduced reward
    const Vec adv = crl::discounted_advantage_operator(m, exact.v);
    for (std::size_t k = 0; k < m.n_pairs(); ++k) {
        double reduced = m.reward_vector()[k] - adv[k];
        for (std::size_t i = 0; i < 2; ++i) reduced += exact.mu[i] * m.constraint_vector(i)[k];
        CHECK(reduced <= 1e-8);
        CHECK(std::abs(reduced * exact.lambda[k]) <= 1e-8);
    }

    const double psi = crl::slater_slack(m).certificate.slack;
    const auto bounds = crl::scaled_dual_bounds(m, psi);
    CHECK(exact.mu[0] + exact.mu[1] <= bounds.mu_l1_radius);
    for (double v : exact.v) CHECK(std::abs(v) <= bounds.v_linf_radius);
}

TEST_CASE("infeasible thresholds") {
    crl::QueueConfig cfg;
    // g1(a) = -10 a + 3 peaks at 1 for the slowest service level
    cfg.h1 = 1.5;
    const auto m = crl::build_queue_cmdp(cfg);
    CHECK(crl::solve_cmdp_exact(m).status == LpStatus::Infeasible);

    // maximum achievable g1 computed as an LP objective
    crl::QueueConfig probe;
    probe.shape.r_slope = 0.0;
    probe.shape.r_intercept = 0.0;
    const auto base = crl::build_queue_cmdp(probe);
    std::vector<std::vector<Vec>> P(base.n_actions(), std::vector<Vec>(base.n_states()));
    std::vector<Vec> r(base.n_states(), Vec(base.n_actions()));
    for (std::size_t a = 0; a < base.n_actions(); ++a)
        for (std::size_t s = 0; s < base.n_states(); ++s) {
            auto row = base.transition_row(a, s);
            P[a][s].assign(row.begin(), row.end());
            r[s][a] = base.constraint_reward(0, s, a);
        }
    const crl::CmdpModel g1_as_reward(P, r, {}, {}, base.discount(), base.initial_dist());
    CHECK(crl::solve_cmdp_exact(g1_as_reward).objective == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("slater slack") {
    SUBCASE("no constraints") {
        const auto res = crl::slater_slack(fixture::single_state());
        CHECK(res.status == crl::SlaterStatus::Holds);
        CHECK(std::isinf(res.certificate.slack));
        CHECK(res.certificate.witness.size() == 1);
    }
    SUBCASE("queue defaults") {
        const auto m = fixture::queue();
        const auto res = crl::slater_slack(m);
        REQUIRE(res.status == crl::SlaterStatus::Holds);
        CHECK(res.certificate.slack == doctest::Approx(0.7319062452).epsilon(1e-9));
        const auto values = crl::value_of_occupancy(m, res.certificate.witness);
        for (std::size_t i = 0; i < 2; ++i) CHECK(values.constraints[i] >= m.thresholds()[i] + res.certificate.slack - 1e-8);
        CHECK(crl::bellman_flow_residual(m, res.certificate.witness) <= 1e-8);
    }
    SUBCASE("threshold at the exact optimum of a constraint") {
        crl::QueueConfig cfg;
        cfg.h1 = 1.0;
        const auto res = crl::slater_slack(crl::build_queue_cmdp(cfg));
        CHECK(res.status == crl::SlaterStatus::Fails);
        CHECK(std::abs(res.certificate.slack) <= 1e-8);
    }
    SUBCASE("paired queue with default thresholds has no feasible point") {
        crl::QueueConfig cfg;
        cfg.action_mode = crl::ActionMode::Paired;
        const auto m = crl::build_queue_cmdp(cfg);
        CHECK(crl::solve_cmdp_exact(m).status == LpStatus::Infeasible);
        CHECK(crl::slater_slack(m).status == crl::SlaterStatus::Fails);
    }
}

TEST_CASE("LP optimum dominates random policies") {
    oracle::Rng rng(31);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t ns = 2 + trial % 2, na = 2 + (trial / 2) % 2, ni = trial % 3 == 0 ? 0 : 1;
        const auto m = oracle::random_cmdp(rng, ns, na, ni, 0.8);
        const auto exact = crl::solve_cmdp_exact(m);
        REQUIRE(exact.status == LpStatus::Optimal);
        for (int k = 0; k < 200; ++k) {
            const Vec lambda = crl::policy_to_occupancy(m, oracle::random_policy(rng, ns, na, 0.3));
            const auto values = crl::value_of_occupancy(m, lambda);
            bool feasible = true;
            for (std::size_t i = 0; i < ni; ++i) feasible = feasible && values.constraints[i] >= m.thresholds()[i];
            if (feasible) CHECK(values.reward <= exact.objective + 1e-9);
        }
    }
}
