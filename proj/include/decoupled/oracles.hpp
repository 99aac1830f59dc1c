#pragma once

// Closed-form ground truth for the two toy MDPs and the hypergrid, plus a
// numerical certification harness for simplex regularizers.
//
// The toy-MDP oracles use only <cmath>; they share no code with the solver so
// agreement between the two is a genuine cross-check.
//
// Loop MDP, decoupled: s1 has n + 1 actions, so its effective temperature is
// tau / log(n + 1) and the exit probability is 1 - n exp(r log(n + 1) / tau).
// loop_exit_probability_log_n() gives the variant with log n in place of
// log(n + 1), which differs from the solver's fixed point.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "decoupled/format.hpp"
#include "decoupled/regularizers.hpp"

namespace decoupled {

/// value is NaN whenever diverges is set.
struct OracleResult {
    double value = std::numeric_limits<double>::quiet_NaN();  // V(s1)
    double value_s2 = std::numeric_limits<double>::quiet_NaN();  // path MDP only
    double prob_a0 = std::numeric_limits<double>::quiet_NaN();
    bool diverges = false;
};

class OracleDomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Path MDP: route a0 straight to the end versus a detour through a state with n actions.
inline OracleResult path_oracle(std::size_t n, double r, double tau, bool decoupled) {
    if (n == 0)
        throw OracleDomainError("path_oracle: n must be at least 1");
    if (!(tau > 0.0))
        throw OracleDomainError("path_oracle: tau must be positive");
    OracleResult out;
    if (!decoupled) {
        // V(s2) = tau log n; pi(a0) = e^{r/tau} / (e^{r/tau} + e^{(r + V(s2))/tau}).
        out.value_s2 = tau * std::log(static_cast<double>(n));
        out.value = r + tau * std::log(static_cast<double>(n + 1));
        out.prob_a0 = 1.0 / (1.0 + std::exp(out.value_s2 / tau));
        return out;
    }
    if (n < 2)
        throw OracleDomainError("path_oracle: decoupled s2 needs n >= 2 (log n must be positive)");
    // s2 at temperature tau / log n with equal Q: V(s2) = (tau / log n) log(n) = tau.
    // s1 at temperature tau / log 2: V(s1) = r + (tau / log 2) log 3.
    const double t1 = tau / std::log(2.0);
    out.value_s2 = tau;
    out.value = r + t1 * std::log(3.0);
    out.prob_a0 = std::exp((r - out.value) / t1);
    return out;
}

/// Loop MDP: exit action a0 versus n self-loops, reward r everywhere.
inline OracleResult loop_oracle(std::size_t n, double r, double tau, bool decoupled) {
    if (n == 0)
        throw OracleDomainError("loop_oracle: n must be at least 1");
    if (!(tau > 0.0))
        throw OracleDomainError("loop_oracle: tau must be positive");
    const double t = decoupled ? tau / std::log(static_cast<double>(n + 1)) : tau;
    // n exp(r / t) >= 1  <=>  log n + r / t >= 0; the log form is exact on the boundary.
    const double z = std::log(static_cast<double>(n)) + r / t;
    OracleResult out;
    if (z >= 0.0) {
        out.diverges = true;
        return out;
    }
    const double exit = -std::expm1(z);  // 1 - n exp(r / t)
    out.prob_a0 = exit;
    out.value = r - t * std::log(exit);
    return out;
}

/// 1 - n exp(r log n / tau), the decoupled exit probability written with log n.
inline double loop_exit_probability_log_n(std::size_t n, double r, double tau) {
    return 1.0 - static_cast<double>(n) * std::exp(r * std::log(static_cast<double>(n)) / tau);
}

inline std::size_t hypergrid_shortest_path(std::size_t n, std::size_t m) {
    if (n == 0 || m < 2)
        throw OracleDomainError("hypergrid_shortest_path: need n >= 1 and m >= 2");
    return n * (m - 1);
}

// Regularizer certification ----------------------------------------------------

/// A simplex function to certify. `sup` and `range` are optional closed forms
/// that the harness compares against its numeric estimates.
struct HarnessSubject {
    std::string name;
    std::function<double(std::span<const double>)> omega;
    std::function<double(std::size_t)> sup;
    std::function<double(std::size_t)> range;
};

inline HarnessSubject harness_subject(const RegularizerSpec& spec) {
    return {to_token(spec), [spec](std::span<const double> p) { return omega(spec, p); },
            [spec](std::size_t n) { return omega_sup(spec, n); },
            [spec](std::size_t n) { return omega_range(spec, n); }};
}

struct HarnessCheck {
    std::string check;
    std::string regularizer;
    std::size_t n = 0;  // witnessing n on failure, n_max on success
    bool pass = true;
    std::string witness;
};

struct HarnessReport {
    std::vector<HarnessCheck> checks;

    bool all_pass() const {
        for (const auto& c : checks)
            if (!c.pass)
                return false;
        return true;
    }

    /// CSV with header `check,regularizer,n,pass,witness`.
    std::string to_csv(bool header = true) const {
        std::ostringstream out;
        if (header)
            out << "check,regularizer,n,pass,witness\n";
        for (const auto& c : checks)
            out << c.check << ',' << csv_field(c.regularizer) << ',' << c.n << ',' << (c.pass ? "true" : "false")
                << ',' << csv_field(c.witness) << '\n';
        return out.str();
    }
};

struct HarnessOptions {
    std::uint64_t seed = 7;
    int random_samples = 16;  // Dirichlet(1) draws per n
    int perturbations = 8;    // pairwise moves away from uniform per n
    double tol = 1e-12;       // relative slack in every comparison
};

namespace detail {

inline double slack(double tol, double a, double b) {
    return tol * std::max({1.0, std::abs(a), std::abs(b)});
}

inline Distribution dirichlet_one(std::size_t n, std::mt19937_64& rng) {
    std::exponential_distribution<double> expo(1.0);
    Distribution p(n);
    double sum = 0.0;
    for (double& x : p) {
        x = expo(rng);
        sum += x;
    }
    for (double& x : p)
        x /= sum;
    return p;
}

}  // namespace detail

/// Certifies, for n = 2..n_max: (a) the supremum is attained at (and in the
/// limit toward) a vertex; (b) the uniform policy is the minimizer; (c) the
/// minimum is non-increasing in n; (d) the range is strictly increasing in n.
inline HarnessReport run_harness(const HarnessSubject& subject, std::size_t n_max, HarnessOptions opts = {}) {
    if (n_max < 3)
        throw std::invalid_argument("harness: n_max must be at least 3");
    std::mt19937_64 rng(opts.seed);
    HarnessCheck sup{"sup-at-deterministic", subject.name, n_max, true, ""};
    HarnessCheck argmin{"min-at-uniform", subject.name, n_max, true, ""};
    HarnessCheck min_mono{"min-non-increasing", subject.name, n_max, true, ""};
    HarnessCheck range_mono{"range-increasing", subject.name, n_max, true, ""};
    const auto fail = [](HarnessCheck& c, std::size_t n, std::string witness) {
        if (!c.pass)
            return;
        c.pass = false;
        c.n = n;
        c.witness = std::move(witness);
    };

    double prev_min = subject.omega(Distribution{1.0});
    double prev_range = 0.0;
    for (std::size_t n = 2; n <= n_max; ++n) {
        const Distribution uniform = uniform_distribution(n);
        const double at_uniform = subject.omega(uniform);
        const double at_vertex = subject.omega(deterministic_distribution(n, 0));
        const double at_last_vertex = subject.omega(deterministic_distribution(n, n - 1));

        // (a)
        if (std::abs(at_vertex - at_last_vertex) > detail::slack(opts.tol, at_vertex, at_last_vertex))
            fail(sup, n, "vertices disagree: " + format_double(at_vertex) + " vs " + format_double(at_last_vertex));
        if (subject.sup && std::abs(at_vertex - subject.sup(n)) > detail::slack(opts.tol, at_vertex, subject.sup(n)))
            fail(sup, n, "vertex value " + format_double(at_vertex) + " != closed-form sup " + format_double(subject.sup(n)));
        for (double eps : {1e-6, 1e-9}) {
            Distribution near(n, eps / static_cast<double>(n - 1));
            near[0] = 1.0 - eps;
            const double v = subject.omega(near);
            if (v > at_vertex + detail::slack(opts.tol, v, at_vertex))
                fail(sup, n, "near-vertex point exceeds vertex value");
            const double limit_slack = 1e3 * eps * (1.0 + std::log(static_cast<double>(n)) + std::abs(std::log(eps)));
            if (std::abs(v - at_vertex) > limit_slack)
                fail(sup, n, "omega does not approach the vertex value (eps=" + format_double(eps) + ")");
        }

        // (a) and (b) against random and perturbed points
        for (int i = 0; i < opts.random_samples; ++i) {
            const Distribution p = detail::dirichlet_one(n, rng);
            const double v = subject.omega(p);
            if (v > at_vertex + detail::slack(opts.tol, v, at_vertex))
                fail(sup, n, "random point above vertex value: " + format_double(v));
            if (v < at_uniform - detail::slack(opts.tol, v, at_uniform))
                fail(argmin, n, "random point below uniform: " + format_double(v) + " < " + format_double(at_uniform));
        }
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        for (int i = 0; i < opts.perturbations; ++i) {
            const std::size_t a = pick(rng);
            std::size_t b = pick(rng);
            if (a == b)
                b = (a + 1) % n;
            for (double scale : {0.5, 1e-4}) {
                Distribution p = uniform;
                const double delta = scale / static_cast<double>(n);
                p[a] += delta;
                p[b] -= delta;
                const double v = subject.omega(p);
                if (v < at_uniform - detail::slack(opts.tol, v, at_uniform))
                    fail(argmin, n, "perturbed uniform is lower: " + format_double(v) + " < " + format_double(at_uniform));
            }
        }

        // (c)
        if (at_uniform > prev_min + detail::slack(opts.tol, at_uniform, prev_min))
            fail(min_mono, n, "min rose from " + format_double(prev_min) + " to " + format_double(at_uniform));
        prev_min = at_uniform;

        // (d)
        const double range = at_vertex - at_uniform;
        if (!(range > prev_range))
            fail(range_mono, n, "range " + format_double(range) + " <= previous " + format_double(prev_range));
        if (subject.range && std::abs(range - subject.range(n)) > 1e-9 * std::max(1.0, range))
            fail(range_mono, n, "numeric range " + format_double(range) + " != closed form " + format_double(subject.range(n)));
        prev_range = range;
    }
    return {{sup, argmin, min_mono, range_mono}};
}

inline HarnessReport standard_regularizer_harness(const RegularizerSpec& spec, std::size_t n_max,
                                                  HarnessOptions opts = {}) {
    return run_harness(harness_subject(spec), n_max, opts);
}

}  // namespace decoupled
