#include <gtest/gtest.h>

#include <cmath>

#include "decoupled/oracles.hpp"
#include "decoupled/solver.hpp"

using namespace decoupled;

TEST(PathOracle, Examples) {
    EXPECT_NEAR(path_oracle(4, 0.0, 1.0, false).prob_a0, 0.2, 1e-15);
    EXPECT_NEAR(path_oracle(1, 3.0, 0.5, false).prob_a0, 0.5, 1e-15);
    for (std::size_t n : {2u, 7u, 64u})
        for (double r : {-2.0, 2.0})
            for (double tau : {0.5, 2.0}) {
                const auto o = path_oracle(n, r, tau, true);
                EXPECT_NEAR(o.prob_a0, 1.0 / 3.0, 1e-15);
                EXPECT_NEAR(o.value_s2, tau, 1e-15);
            }
    EXPECT_THROW(path_oracle(1, 0.0, 1.0, true), OracleDomainError);
}

TEST(PathOracle, BiasGrowsWithoutDecoupling) {
    double prev = 1.0;
    for (std::size_t n = 1; n <= 64; ++n) {
        const double p = path_oracle(n, 0.0, 1.0, false).prob_a0;
        EXPECT_LT(p, prev);
        EXPECT_NEAR(p, 1.0 / (n + 1.0), 1e-15);
        prev = p;
    }
}

TEST(LoopOracle, Examples) {
    const auto converges = loop_oracle(2, -1.0, 1.0, false);
    EXPECT_FALSE(converges.diverges);
    EXPECT_NEAR(converges.prob_a0, 1.0 - 2.0 * std::exp(-1.0), 1e-15);
    EXPECT_NEAR(converges.prob_a0, 0.2642, 1e-4);
    EXPECT_TRUE(loop_oracle(3, -1.0, 1.0, false).diverges);
    EXPECT_TRUE(loop_oracle(1, 0.0, 1.0, false).diverges);
    for (std::size_t n = 1; n <= 64; ++n)
        EXPECT_FALSE(loop_oracle(n, -1.0001, 1.0, true).diverges) << n;
    EXPECT_TRUE(loop_oracle(3, -0.5, 1.0, true).diverges);
}

TEST(LoopOracle, ExitProbabilityFallsWithReward) {
    for (bool dec : {false, true})
        for (std::size_t n : {1u, 3u, 10u}) {
            double prev = 2.0;
            for (double r = -6.0; r < -2.5; r += 0.1) {
                const auto o = loop_oracle(n, r, 1.0, dec);
                ASSERT_FALSE(o.diverges);
                EXPECT_LT(o.prob_a0, prev);
                prev = o.prob_a0;
            }
        }
}

TEST(LoopOracle, LogNVariantDiffers) {
    const double with_n_plus_one = loop_oracle(3, -2.0, 1.0, true).prob_a0;
    EXPECT_NEAR(with_n_plus_one, 1.0 - 3.0 * std::exp(-2.0 * std::log(4.0)), 1e-15);
    EXPECT_GT(std::abs(loop_exit_probability_log_n(3, -2.0, 1.0) - with_n_plus_one), 1e-3);
}

TEST(LoopOracle, AgreesWithSolverOnBothSidesOfTheBoundary) {
    SolveOptions opts;
    opts.tol = 1e-12;
    opts.max_iter = 10'000;
    for (bool dec : {false, true})
        for (std::size_t n : {1u, 2u, 4u})
            for (double r : {-3.0, -2.0, -1.2, -0.8, 0.0})
                for (double tau : {0.5, 1.0}) {
                    const auto o = loop_oracle(n, r, tau, dec);
                    const auto report = soft_value_iteration(build_loop_mdp(n, r), RegularizerSpec::entropy(dec), tau, opts);
                    if (o.diverges) {
                        EXPECT_EQ(report.status, SolveStatus::diverged);
                        continue;
                    }
                    ASSERT_EQ(report.status, SolveStatus::converged) << n << ' ' << r << ' ' << tau << ' ' << dec;
                    EXPECT_NEAR(report.v[0], o.value, 1e-8);
                    EXPECT_NEAR(report.policy[0][0], o.prob_a0, 1e-8);
                }
}

TEST(HypergridOracle, ShortestPath) {
    EXPECT_EQ(hypergrid_shortest_path(2, 3), 4u);
    EXPECT_EQ(hypergrid_shortest_path(1, 2), 1u);
    EXPECT_EQ(hypergrid_shortest_path(7, 4), 21u);
    EXPECT_THROW(hypergrid_shortest_path(2, 1), OracleDomainError);
}

TEST(Harness, StandardRegularizersPass) {
    for (const auto& spec : {RegularizerSpec::entropy(), RegularizerSpec::kl_uniform(), RegularizerSpec::tsallis(),
                             RegularizerSpec::tsallis(3.0, 0.5)}) {
        const auto report = standard_regularizer_harness(spec, 100);
        ASSERT_EQ(report.checks.size(), 4u);
        EXPECT_TRUE(report.all_pass()) << report.to_csv();
    }
    EXPECT_LT(omega_range(RegularizerSpec::tsallis(), 100), 1.0);
}

TEST(Harness, NonConvexGeneratorFailsUniformCheck) {
    // sum of sqrt(p) is concave, so its maximum sits at the uniform point.
    HarnessSubject bad{"neg-sqrt", [](std::span<const double> p) {
                           double acc = 0.0;
                           for (double x : p)
                               acc += std::sqrt(x);
                           return acc;
                       },
                       nullptr, nullptr};
    const auto report = run_harness(bad, 20);
    EXPECT_FALSE(report.all_pass());
    bool uniform_failed = false;
    for (const auto& c : report.checks)
        if (c.check == "min-at-uniform") {
            uniform_failed = !c.pass;
            EXPECT_EQ(c.n, 2u);
            EXPECT_FALSE(c.witness.empty());
        }
    EXPECT_TRUE(uniform_failed);
}

TEST(Harness, WrongClosedFormRangeIsCaught) {
    auto subject = harness_subject(RegularizerSpec::entropy());
    subject.range = [](std::size_t n) { return std::log(static_cast<double>(n + 1)); };
    const auto report = run_harness(subject, 10);
    EXPECT_FALSE(report.checks[3].pass);
}

TEST(Harness, CsvShape) {
    const auto csv = standard_regularizer_harness(RegularizerSpec::tsallis(), 10).to_csv();
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "check,regularizer,n,pass,witness");
    EXPECT_NE(csv.find("\"tsallis:q=2,k=1\""), std::string::npos);
}
