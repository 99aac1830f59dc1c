#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "decoupled/solver.hpp"
#include "generators.hpp"

using namespace decoupled;

namespace {

// V(s1) and exit probability of the loop MDP at a fixed temperature t, from
// V = r + t log(e^{0} + n e^{V/t}) solved for V.
std::pair<double, double> loop_fixed_point(std::size_t n, double r, double t) {
    const double exit = 1.0 - static_cast<double>(n) * std::exp(r / t);
    return {r - t * std::log(exit), exit};
}

TabularMDP bandit(std::vector<double> rewards, double gamma) {
    TabularMDP mdp;
    mdp.num_states = 2;
    mdp.gamma = gamma;
    mdp.terminals = {1};
    mdp.initial = {{0, 1.0}};
    mdp.actions.resize(2);
    for (double r : rewards)
        mdp.actions[0].push_back({r, {{1, 1.0}}});
    return mdp;
}

}  // namespace

TEST(Backup, PathFromZero) {
    for (std::size_t n : {2u, 5u, 40u})
        for (double tau : {0.5, 2.0}) {
            const auto mdp = build_path_mdp(n, 1.0);
            const VTable zero(3, 0.0);
            const auto plain = regularized_backup(mdp, RegularizerSpec::entropy(), tau, zero);
            EXPECT_NEAR(plain.v[1], tau * std::log(static_cast<double>(n)), 1e-12);
            const auto dec = regularized_backup(mdp, RegularizerSpec::entropy(true), tau, zero);
            EXPECT_NEAR(dec.v[1], tau, 1e-12);
            EXPECT_EQ(plain.v[2], 0.0);
        }
}

TEST(Backup, SingletonActionsAreUnregularized) {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 20; ++trial) {
        auto mdp = testgen::random_stochastic_mdp(rng, 6, 1, 0.9);
        const auto v = testgen::uniform_vector(rng, 6, -3.0, 3.0);
        auto v0 = v;
        v0[5] = 0.0;
        const auto out = regularized_backup(mdp, RegularizerSpec::entropy(trial % 2 == 0), 1.7, v0);
        for (StateId s = 0; s < 5; ++s) {
            const auto& a = mdp.actions[s][0];
            double expected = a.reward;
            for (const auto& tr : a.next)
                expected += 0.9 * tr.prob * v0[tr.next];
            EXPECT_NEAR(out.v[s], expected, 1e-12);
        }
    }
}

TEST(Backup, RejectsWrongLength) {
    EXPECT_THROW(regularized_backup(build_path_mdp(2, 0.0), RegularizerSpec::entropy(), 1.0, VTable(2, 0.0)),
                 std::invalid_argument);
}

TEST(SoftValueIteration, LoopConvergesToFixedPoint) {
    for (std::size_t n : {1u, 2u, 5u})
        for (double r : {-3.0, -2.0}) {
            const auto report = soft_value_iteration(build_loop_mdp(n, r), RegularizerSpec::entropy(), 1.0);
            ASSERT_EQ(report.status, SolveStatus::converged);
            const auto [value, exit] = loop_fixed_point(n, r, 1.0);
            EXPECT_NEAR(report.v[0], value, 1e-8);
            EXPECT_NEAR(report.policy[0][0], exit, 1e-8);
        }
}

TEST(SoftValueIteration, LoopDivergesPastBoundary) {
    SolveOptions opts;
    opts.max_iter = 10'000;
    for (auto [n, r] : std::vector<std::pair<std::size_t, double>>{{3, -1.0}, {1, 0.0}, {2, -0.5}, {8, 1.0}}) {
        const auto report = soft_value_iteration(build_loop_mdp(n, r), RegularizerSpec::entropy(), 1.0, opts);
        EXPECT_EQ(report.status, SolveStatus::diverged) << "n=" << n << " r=" << r;
    }
}

TEST(SoftValueIteration, DiscountedAlwaysConverges) {
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 30; ++trial) {
        const auto mdp = testgen::random_stochastic_mdp(rng, testgen::pick(rng, 2, 12), 6, 0.9);
        const std::vector<RegularizerSpec> specs{RegularizerSpec::entropy(trial % 2 == 0),
                                                 RegularizerSpec::kl_uniform(trial % 2 == 1),
                                                 RegularizerSpec::tsallis(2.0, 1.0, trial % 3 == 0)};
        for (const auto& spec : specs) {
            const auto report = soft_value_iteration(mdp, spec, 0.7);
            ASSERT_EQ(report.status, SolveStatus::converged) << to_token(spec);
            EXPECT_LT(report.residuals().back(), SolveOptions{}.tol);
        }
    }
}

TEST(SoftValueIteration, PolicyIsConjugatePolicyOfQ) {
    std::mt19937_64 rng(43);
    for (int trial = 0; trial < 20; ++trial) {
        const auto mdp = testgen::random_stochastic_mdp(rng, 8, 5, 0.95);
        for (const auto& spec : {RegularizerSpec::entropy(true), RegularizerSpec::tsallis(2.0, 0.5, true),
                                 RegularizerSpec::kl_uniform()}) {
            const auto report = soft_value_iteration(mdp, spec, 0.4);
            ASSERT_EQ(report.status, SolveStatus::converged);
            for (StateId s = 0; s < mdp.num_states; ++s) {
                if (mdp.actions[s].empty())
                    continue;
                const double t = effective_temperature(spec, 0.4, mdp.num_actions(s));
                EXPECT_EQ(report.effective_temperatures[s], t);
                const auto expected = conjugate_policy(spec, report.q[s], t);
                for (std::size_t a = 0; a < expected.size(); ++a)
                    EXPECT_NEAR(report.policy[s][a], expected[a], 1e-15);
            }
        }
    }
}

TEST(SoftValueIteration, ValueNonDecreasingInTemperature) {
    for (bool dec : {false, true}) {
        VTable prev;
        for (double tau : {0.1, 0.5, 1.0, 2.0}) {
            const auto report = soft_value_iteration(build_path_mdp(6, -0.5), RegularizerSpec::entropy(dec), tau);
            ASSERT_EQ(report.status, SolveStatus::converged);
            for (StateId s = 0; s < prev.size(); ++s) {
                EXPECT_GE(report.v[s], prev[s] - 1e-12);
            }
            prev = report.v;
        }
    }
}

TEST(SoftValueIteration, DecoupledValueOfSymmetricStateIgnoresActionCount) {
    for (std::size_t n : {2u, 3u, 10u, 200u}) {
        const auto mdp = bandit(std::vector<double>(n, 0.25), 1.0);
        const auto dec = soft_value_iteration(mdp, RegularizerSpec::entropy(true), 0.6);
        const auto plain = soft_value_iteration(mdp, RegularizerSpec::entropy(false), 0.6);
        EXPECT_NEAR(dec.v[0], 0.25 + 0.6, 1e-12);
        EXPECT_NEAR(plain.v[0], 0.25 + 0.6 * std::log(static_cast<double>(n)), 1e-12);
    }
}

TEST(SoftValueIteration, MaxIterStatus) {
    SolveOptions opts;
    opts.max_iter = 3;
    const auto report = soft_value_iteration(build_hypergrid(2, 4), RegularizerSpec::entropy(), 0.4, opts);
    EXPECT_EQ(report.status, SolveStatus::max_iter);
    EXPECT_EQ(report.iterations, 3);
}

TEST(DecoupledSql, PathReachesOneThird) {
    SqlOptions opts;
    opts.episodes = 2000;
    opts.seed = 5;
    for (std::size_t n : {2u, 6u, 20u}) {
        const auto report = decoupled_sql(build_path_mdp(n, 0.5), RegularizerSpec::entropy(true), 1.0, opts);
        ASSERT_EQ(report.status, SolveStatus::converged) << report.note;
        EXPECT_NEAR(report.policy[0][0], 1.0 / 3.0, 1e-9);
    }
}

TEST(DecoupledSql, SingleActionMdpLearnsReturns) {
    TabularMDP chain;
    chain.num_states = 4;
    chain.gamma = 1.0;
    chain.terminals = {3};
    chain.initial = {{0, 1.0}};
    chain.actions = {{{-1.0, {{1, 1.0}}}}, {{2.0, {{2, 1.0}}}}, {{0.5, {{3, 1.0}}}}, {}};
    SqlOptions opts;
    opts.episodes = 5;
    const auto report = decoupled_sql(chain, RegularizerSpec::entropy(true), 1.0, opts);
    EXPECT_EQ(report.status, SolveStatus::converged);
    EXPECT_DOUBLE_EQ(report.q[0][0], 1.5);
    EXPECT_DOUBLE_EQ(report.q[1][0], 2.5);
    EXPECT_DOUBLE_EQ(report.q[2][0], 0.5);
}

TEST(DecoupledSql, AgreesWithValueIteration) {
    SqlOptions opts;
    opts.seed = 77;
    for (bool dec : {false, true})
        for (const auto& mdp : {build_path_mdp(3, -1.0), build_path_mdp(8, 2.0), build_loop_mdp(2, -2.0),
                                build_loop_mdp(4, -3.0)}) {
            const auto spec = RegularizerSpec::entropy(dec);
            const auto vi = soft_value_iteration(mdp, spec, 1.0);
            const auto sql = decoupled_sql(mdp, spec, 1.0, opts);
            ASSERT_EQ(vi.status, SolveStatus::converged);
            ASSERT_EQ(sql.status, SolveStatus::converged) << sql.note;
            for (StateId s = 0; s < mdp.num_states; ++s)
                for (std::size_t a = 0; a < vi.q[s].size(); ++a)
                    EXPECT_NEAR(sql.q[s][a], vi.q[s][a], 1e-6);
        }
}

TEST(DecoupledSql, RandomTerminatingMdps) {
    std::mt19937_64 rng(44);
    SqlOptions opts;
    opts.seed = 3;
    opts.episodes = 20'000;
    for (int trial = 0; trial < 10; ++trial) {
        // Narrow reward spread keeps every action likely enough to be revisited.
        const auto mdp = testgen::random_terminating_mdp(rng, 6, 3, -2.0, -1.5);
        const auto spec = RegularizerSpec::entropy(true);
        const auto vi = soft_value_iteration(mdp, spec, 1.0);
        ASSERT_EQ(vi.status, SolveStatus::converged);
        const auto sql = decoupled_sql(mdp, spec, 1.0, opts);
        // Unreached states keep Q = 0, so compare only where the start state leads.
        for (std::size_t a = 0; a < vi.q[0].size(); ++a)
            EXPECT_NEAR(sql.q[0][a], vi.q[0][a], 1e-6) << "trial " << trial;
    }
}

TEST(DecoupledSql, StepCapAndStochasticGuard) {
    SqlOptions opts;
    opts.episodes = 3;
    opts.step_cap = 50;
    const auto report = decoupled_sql(build_loop_mdp(3, 0.5), RegularizerSpec::entropy(), 1.0, opts);
    EXPECT_NE(report.status, SolveStatus::converged);

    std::mt19937_64 rng(45);
    const auto stochastic = testgen::random_stochastic_mdp(rng, 5, 3, 0.9);
    EXPECT_THROW(decoupled_sql(stochastic, RegularizerSpec::entropy(), 1.0, {}), std::invalid_argument);
    SqlOptions blended;
    blended.learning_rate = 0.5;
    blended.episodes = 100;
    EXPECT_NO_THROW(decoupled_sql(stochastic, RegularizerSpec::entropy(), 1.0, blended));
}

TEST(DecoupledSql, SameSeedSameResult) {
    SqlOptions opts;
    opts.episodes = 300;
    opts.seed = 9;
    const auto a = decoupled_sql(build_loop_mdp(3, -2.0), RegularizerSpec::entropy(true), 1.0, opts);
    const auto b = decoupled_sql(build_loop_mdp(3, -2.0), RegularizerSpec::entropy(true), 1.0, opts);
    EXPECT_EQ(a.q, b.q);
}

TEST(ConvergencePredicate, Examples) {
    EXPECT_TRUE(check_undiscounted_convergence(build_loop_mdp(3, -1.01), 1.0, true).holds);
    EXPECT_FALSE(check_undiscounted_convergence(build_loop_mdp(3, -0.5), 1.0, true).holds);
    SolveOptions opts;
    opts.max_iter = 10'000;
    EXPECT_EQ(soft_value_iteration(build_loop_mdp(3, -0.5), RegularizerSpec::entropy(true), 1.0, opts).status,
              SolveStatus::diverged);

    TabularMDP self_loop;
    self_loop.num_states = 1;
    self_loop.gamma = 1.0;
    self_loop.initial = {{0, 1.0}};
    self_loop.actions = {{{-1.0, {{0, 1.0}}}}};
    const auto check = check_undiscounted_convergence(self_loop, 1.0, false);
    EXPECT_TRUE(check.holds);
    EXPECT_NEAR(check.states[0].exp_sum, std::exp(-1.0), 1e-15);

    auto discounted = build_loop_mdp(2, -2.0);
    discounted.gamma = 0.9;
    EXPECT_THROW(check_undiscounted_convergence(discounted, 1.0, true), std::invalid_argument);
}

TEST(ConvergencePredicate, SoundOnRandomTerminatingMdps) {
    std::mt19937_64 rng(46);
    SolveOptions opts;
    opts.max_iter = 100'000;
    int holds = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const double tau = std::uniform_real_distribution<double>(0.2, 2.0)(rng);
        const auto mdp = testgen::random_terminating_mdp(rng, testgen::pick(rng, 2, 10), 5, -4.0 * tau, -1.001 * tau);
        const auto check = check_undiscounted_convergence(mdp, tau, true);
        if (!check.holds)
            continue;
        ++holds;
        const auto report = soft_value_iteration(mdp, RegularizerSpec::entropy(true), tau, opts);
        EXPECT_EQ(report.status, SolveStatus::converged) << "trial " << trial;
    }
    EXPECT_EQ(holds, 200);
}

TEST(HittingTime, ShortestPathOnHypergrid) {
    for (std::size_t n = 1; n <= 3; ++n) {
        const std::size_t m = 4;
        const auto mdp = build_hypergrid(n, m);
        PolicyTable policy(mdp.num_states);
        for (StateId s = 0; s < mdp.num_states; ++s) {
            if (mdp.actions[s].empty())
                continue;
            const auto coords = hypergrid_coordinates(s, n, m);
            std::size_t axis = 0;
            while (coords[axis] == m)
                ++axis;
            policy[s] = deterministic_distribution(2 * n, 2 * axis);
        }
        const auto times = expected_hitting_time(mdp, policy);
        ASSERT_TRUE(times.converged);
        EXPECT_NEAR(times.steps[0], static_cast<double>(n * (m - 1)), 1e-9);
    }
}

TEST(HittingTime, UniformPolicyOnLine) {
    const auto mdp = build_hypergrid(1, 2);
    PolicyTable policy{uniform_distribution(2), {}};
    const auto times = expected_hitting_time(mdp, policy);
    ASSERT_TRUE(times.converged);
    EXPECT_NEAR(times.steps[0], 2.0, 1e-9);
}

TEST(HittingTime, NeverExitingIsInfinite) {
    const auto mdp = build_loop_mdp(3, -1.0);
    PolicyTable policy{Distribution{0.0, 0.5, 0.25, 0.25}, {}};
    const auto times = expected_hitting_time(mdp, policy);
    EXPECT_TRUE(times.infinite[0]);
    EXPECT_TRUE(std::isinf(times.steps[0]));
    EXPECT_EQ(times.steps[1], 0.0);
}

TEST(HittingTime, GeometricExit) {
    const auto mdp = build_loop_mdp(3, -1.0);
    PolicyTable policy{Distribution{0.2, 0.4, 0.2, 0.2}, {}};
    EXPECT_NEAR(expected_hitting_time(mdp, policy).steps[0], 5.0, 1e-8);
}

TEST(DualStep, Examples) {
    EXPECT_EQ(dual_temperature_step(0.3, 1.0, 1.0, 0.1), 0.3);
    EXPECT_GT(dual_temperature_step(0.3, 0.5, 1.0, 0.1), 0.3);
    EXPECT_LT(dual_temperature_step(0.3, 1.5, 1.0, 0.1), 0.3);
    EXPECT_NEAR(dual_temperature_step(0.0, 0.5, 1.0, 0.1), 0.05, 1e-15);
    EXPECT_THROW(dual_temperature_step(0.0, 0.5, 1.0, 0.0), std::invalid_argument);
}

TEST(AutoTemperature, UniformTargetOnSymmetricRewards) {
    auto mdp = bandit({0.5, 0.5, 0.5, 0.5}, 0.99);
    AutoTempOptions opts;
    const auto report = solve_with_auto_temperature(mdp, RegularizerSpec::entropy(), opts);
    EXPECT_EQ(report.status, SolveStatus::converged);
    EXPECT_FALSE(report.target_infeasible);
    EXPECT_TRUE(std::isfinite(report.temperature));
    EXPECT_NEAR(discrete_entropy(report.policy[0]), std::log(4.0), 1e-6);
}

TEST(AutoTemperature, InfeasibleTargetHitsCeiling) {
    auto mdp = build_path_mdp(8, 0.0);
    mdp.gamma = 0.99;
    AutoTempOptions opts;
    opts.alpha = 0.0;
    opts.min_entropy = 5.0;
    opts.step = 0.5;
    opts.tau_ceiling = 1e4;
    const auto report = solve_with_auto_temperature(mdp, RegularizerSpec::entropy(), opts);
    EXPECT_TRUE(report.target_infeasible);
    EXPECT_EQ(report.temperature, 1e4);
    EXPECT_EQ(report.temperature_trajectory.back(), 1e4);
    for (std::size_t i = 1; i < report.temperature_trajectory.size(); ++i)
        EXPECT_GT(report.temperature_trajectory[i], report.temperature_trajectory[i - 1]);
}

TEST(AutoTemperature, ZeroTargetApproachesGreedy) {
    const auto mdp = bandit({1.0, 0.0, 0.0}, 0.99);
    AutoTempOptions opts;
    opts.alpha = 0.0;
    opts.min_entropy = 0.0;
    opts.step = 1.0;
    opts.entropy_tol = 1e-3;
    const auto report = solve_with_auto_temperature(mdp, RegularizerSpec::entropy(), opts);
    EXPECT_EQ(report.status, SolveStatus::converged) << report.note;
    EXPECT_LT(report.temperature, 0.2);
    for (std::size_t i = 1; i < report.temperature_trajectory.size(); ++i)
        EXPECT_LT(report.temperature_trajectory[i], report.temperature_trajectory[i - 1]);
    EXPECT_GT(report.policy[0][0], 0.999);
}

TEST(AutoTemperature, RejectsUndiscounted) {
    EXPECT_THROW(solve_with_auto_temperature(build_path_mdp(3, 0.0), RegularizerSpec::entropy(), {}),
                 std::invalid_argument);
}
