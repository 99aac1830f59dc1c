#pragma once

// Regularized Bellman machinery: soft value iteration, the online decoupled
// soft Q-learning loop, the undiscounted convergence predicate, expected
// hitting times and the tabular temperature controller.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "decoupled/mdp.hpp"
#include "decoupled/numerics.hpp"
#include "decoupled/regularizers.hpp"

namespace decoupled {

enum class SolveStatus { converged, diverged, max_iter };

inline std::string to_string(SolveStatus status) {
    switch (status) {
        case SolveStatus::converged: return "converged";
        case SolveStatus::diverged: return "diverged";
        case SolveStatus::max_iter: return "max-iter";
    }
    return "unknown";
}

struct SolveOptions {
    double tol = 1e-10;            // sup-norm residual threshold
    int max_iter = 100'000;
    double value_bound = 1e12;     // |V| beyond this counts as divergence
    // Undiscounted runs only: a residual that has not shrunk below
    // stall_factor times its value stall_window iterations earlier, or that
    // grew for increase_window consecutive iterations, counts as divergence.
    int stall_window = 1000;
    double stall_factor = 0.5;
    int increase_window = 1000;

    void validate() const {
        if (!(tol > 0.0))
            throw std::invalid_argument("SolveOptions: tol must be positive");
        if (max_iter < 1)
            throw std::invalid_argument("SolveOptions: max_iter must be at least 1");
        if (!(value_bound > 0.0))
            throw std::invalid_argument("SolveOptions: value_bound must be positive");
        if (stall_window < 1 || increase_window < 1)
            throw std::invalid_argument("SolveOptions: divergence windows must be positive");
    }
};

/// One row of the residual trace.
struct IterationRecord {
    int iter = 0;
    double residual = 0.0;
    double max_abs_v = 0.0;
    double temperature = 0.0;
};

struct SolveReport {
    VTable v;
    QTable q;
    PolicyTable policy;
    SolveStatus status = SolveStatus::max_iter;
    int iterations = 0;
    std::vector<IterationRecord> trace;
    double temperature = 0.0;                    // base temperature of the final solve
    std::vector<double> effective_temperatures;  // per state; 0 at terminals
    std::vector<double> temperature_trajectory;  // controller runs only
    bool target_infeasible = false;
    std::size_t truncated_episodes = 0;          // online runs only
    std::string note;

    std::vector<double> residuals() const {
        std::vector<double> out;
        out.reserve(trace.size());
        for (const auto& r : trace)
            out.push_back(r.residual);
        return out;
    }
};

/// Per-state temperatures used by every backup; terminals get zero.
inline std::vector<double> state_temperatures(const TabularMDP& mdp, const RegularizerSpec& spec, double tau) {
    std::vector<double> out(mdp.num_states, 0.0);
    for (StateId s = 0; s < mdp.num_states; ++s)
        if (mdp.num_actions(s) > 0)
            out[s] = effective_temperature(spec, tau, mdp.num_actions(s));
    return out;
}

namespace detail {

inline double expected_next_value(const TabularMDP& mdp, const Action& a, const VTable& v) {
    double acc = 0.0;
    for (const auto& tr : a.next)
        acc += tr.prob * v[tr.next];
    return a.reward + mdp.gamma * acc;
}

inline double state_value(const RegularizerSpec& spec, std::span<const double> q_row, double temperature) {
    if (q_row.size() == 1)
        return q_row.front();
    return conjugate_value(spec, q_row, temperature);
}

inline PolicyTable policy_from_q(const TabularMDP& mdp, const RegularizerSpec& spec, const QTable& q,
                                 const std::vector<double>& temps) {
    PolicyTable policy(mdp.num_states);
    for (StateId s = 0; s < mdp.num_states; ++s) {
        if (q[s].empty())
            continue;
        policy[s] = q[s].size() == 1 ? Distribution{1.0} : conjugate_policy(spec, q[s], temps[s]);
    }
    return policy;
}

inline bool all_finite(const std::vector<double>& xs) {
    return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
}

// 53 random bits mapped to [0, 1); identical on every standard library.
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

template <typename Weights, typename Project>
std::size_t sample_index(const Weights& items, Project weight, std::mt19937_64& rng) {
    const double u = uniform01(rng);
    double acc = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < items.size(); ++i) {
        const double w = weight(items[i]);
        if (w > 0.0)
            last_positive = i;
        acc += w;
        if (u < acc)
            return i;
    }
    return last_positive;
}

}  // namespace detail

// Backup -----------------------------------------------------------------------

struct BackupResult {
    VTable v;
    QTable q;
    bool finite = true;
};

/// One synchronous regularized Bellman backup. Q'(s, a) = R + gamma E V(s');
/// V'(s) is the conjugate of Q'(s, .) at the state's effective temperature,
/// Q' itself for singleton action sets and 0 at terminals.
inline BackupResult regularized_backup(const TabularMDP& mdp, const RegularizerSpec& spec, double tau,
                                       const VTable& v) {
    if (v.size() != mdp.num_states)
        throw std::invalid_argument("regularized_backup: value table has wrong length");
    const auto temps = state_temperatures(mdp, spec, tau);
    BackupResult out{VTable(mdp.num_states, 0.0), QTable(mdp.num_states), true};
    for (StateId s = 0; s < mdp.num_states; ++s) {
        const auto& row = mdp.actions[s];
        if (row.empty())
            continue;
        auto& q_row = out.q[s];
        q_row.resize(row.size());
        for (std::size_t a = 0; a < row.size(); ++a)
            q_row[a] = detail::expected_next_value(mdp, row[a], v);
        if (!detail::all_finite(q_row)) {
            out.finite = false;
            out.v[s] = std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        out.v[s] = detail::state_value(spec, q_row, temps[s]);
        out.finite = out.finite && std::isfinite(out.v[s]);
    }
    return out;
}

// Soft value iteration ---------------------------------------------------------

namespace detail {

inline SolveReport soft_value_iteration_from(const TabularMDP& mdp, const RegularizerSpec& spec, double tau,
                                             const SolveOptions& opts, VTable v) {
    opts.validate();
    spec.validate();
    if (!(tau > 0.0))
        throw std::invalid_argument("soft_value_iteration: tau must be positive");

    SolveReport report;
    report.temperature = tau;
    report.effective_temperatures = state_temperatures(mdp, spec, tau);
    const bool undiscounted = mdp.gamma >= 1.0;
    int increasing_run = 0;

    QTable q = zero_q_table(mdp);
    report.status = SolveStatus::max_iter;
    for (int it = 1; it <= opts.max_iter; ++it) {
        BackupResult next = regularized_backup(mdp, spec, tau, v);
        double residual = 0.0, max_abs = 0.0;
        for (StateId s = 0; s < mdp.num_states; ++s) {
            residual = std::max(residual, std::abs(next.v[s] - v[s]));
            max_abs = std::max(max_abs, std::abs(next.v[s]));
        }
        if (!next.finite) {
            residual = std::numeric_limits<double>::infinity();
            max_abs = std::numeric_limits<double>::infinity();
        }
        report.trace.push_back({it, residual, max_abs, tau});
        report.iterations = it;

        if (!next.finite || max_abs > opts.value_bound) {
            report.status = SolveStatus::diverged;
            report.note = !next.finite ? "non-finite value" : "value bound exceeded";
            report.v = std::move(next.v);
            report.q = std::move(next.q);
            return report;
        }
        v = std::move(next.v);
        q = std::move(next.q);
        if (residual < opts.tol) {
            report.status = SolveStatus::converged;
            break;
        }

        if (undiscounted) {
            const auto& trace = report.trace;
            increasing_run = (trace.size() >= 2 && residual > trace[trace.size() - 2].residual) ? increasing_run + 1 : 0;
            const bool above_noise = residual > 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, max_abs);
            const bool stalled = it > opts.stall_window && above_noise &&
                                 residual > opts.stall_factor * trace[trace.size() - 1 - opts.stall_window].residual;
            if (increasing_run >= opts.increase_window || stalled) {
                report.status = SolveStatus::diverged;
                report.note = stalled ? "residual stopped contracting" : "residual kept increasing";
                break;
            }
        }
    }

    report.v = std::move(v);
    report.q = std::move(q);
    report.policy = policy_from_q(mdp, spec, report.q, report.effective_temperatures);
    return report;
}

}  // namespace detail

/// Iterates regularized_backup from V = 0 until the sup-norm residual drops
/// below tol, the values blow up, or max_iter is reached. The policy is the
/// conjugate policy of the final Q at each state's effective temperature.
inline SolveReport soft_value_iteration(const TabularMDP& mdp, const RegularizerSpec& spec, double tau,
                                        const SolveOptions& opts = {}) {
    return detail::soft_value_iteration_from(mdp, spec, tau, opts, VTable(mdp.num_states, 0.0));
}

// Online decoupled soft Q-learning --------------------------------------------

struct SqlOptions {
    std::size_t episodes = 10'000;
    double learning_rate = 1.0;  // 1 is the direct assignment of the tabular algorithm
    std::uint64_t seed = 0;
    std::size_t step_cap = 10'000;
    double value_bound = 1e12;
    double tol = 1e-6;  // Bellman residual that counts as converged at the end

    void validate() const {
        if (episodes == 0)
            throw std::invalid_argument("SqlOptions: episodes must be positive");
        if (!(learning_rate > 0.0 && learning_rate <= 1.0))
            throw std::invalid_argument("SqlOptions: learning_rate must lie in (0, 1]");
        if (step_cap == 0)
            throw std::invalid_argument("SqlOptions: step_cap must be positive");
    }
};

/// Max over (s, a) of |Q(s, a) - (R + gamma E V(s'))| with V read off Q itself.
inline double bellman_residual(const TabularMDP& mdp, const RegularizerSpec& spec, const QTable& q,
                               const std::vector<double>& temps) {
    VTable v(mdp.num_states, 0.0);
    for (StateId s = 0; s < mdp.num_states; ++s)
        if (!q[s].empty())
            v[s] = detail::state_value(spec, q[s], temps[s]);
    double worst = 0.0;
    for (StateId s = 0; s < mdp.num_states; ++s)
        for (std::size_t a = 0; a < q[s].size(); ++a)
            worst = std::max(worst, std::abs(q[s][a] - detail::expected_next_value(mdp, mdp.actions[s][a], v)));
    return worst;
}

/// Tabular soft Q-learning on sampled trajectories. At every visited state the
/// action is drawn from the conjugate policy at that state's effective
/// temperature; the target r + gamma V(s') evaluates V(s') at the effective
/// temperature of s'.
inline SolveReport decoupled_sql(const TabularMDP& mdp, const RegularizerSpec& spec, double tau,
                                 const SqlOptions& opts = {}) {
    opts.validate();
    spec.validate();
    if (!(tau > 0.0))
        throw std::invalid_argument("decoupled_sql: tau must be positive");
    if (opts.learning_rate == 1.0 && !mdp.is_deterministic())
        throw std::invalid_argument("decoupled_sql: learning_rate 1 requires deterministic transitions");

    SolveReport report;
    report.temperature = tau;
    report.effective_temperatures = state_temperatures(mdp, spec, tau);
    const auto& temps = report.effective_temperatures;

    QTable q = zero_q_table(mdp);
    std::mt19937_64 rng(opts.seed);
    const auto prob = [](const Transition& t) { return t.prob; };
    std::size_t total_steps = 0;

    const auto value_of = [&](StateId s) {
        return q[s].empty() ? 0.0 : detail::state_value(spec, q[s], temps[s]);
    };

    report.status = SolveStatus::max_iter;
    for (std::size_t episode = 1; episode <= opts.episodes; ++episode) {
        StateId s = mdp.initial[detail::sample_index(mdp.initial, prob, rng)].next;
        double largest_update = 0.0;
        std::size_t steps = 0;
        bool blew_up = false;
        while (!q[s].empty() && steps < opts.step_cap) {
            const std::size_t a = q[s].size() == 1
                                      ? 0
                                      : detail::sample_index(conjugate_policy(spec, q[s], temps[s]),
                                                             [](double p) { return p; }, rng);
            const Action& act = mdp.actions[s][a];
            const StateId next = act.next[detail::sample_index(act.next, prob, rng)].next;
            const double target = act.reward + mdp.gamma * value_of(next);
            const double updated = (1.0 - opts.learning_rate) * q[s][a] + opts.learning_rate * target;
            largest_update = std::max(largest_update, std::abs(updated - q[s][a]));
            q[s][a] = updated;
            ++steps;
            if (!std::isfinite(updated) || std::abs(updated) > opts.value_bound) {
                blew_up = true;
                break;
            }
            s = next;
        }
        total_steps += steps;
        if (steps >= opts.step_cap && !q[s].empty())
            ++report.truncated_episodes;
        report.trace.push_back({static_cast<int>(episode), largest_update, 0.0, tau});
        report.iterations = static_cast<int>(episode);
        if (blew_up) {
            report.status = SolveStatus::diverged;
            report.note = "Q left the finite range";
            report.q = std::move(q);
            return report;
        }
    }

    report.q = std::move(q);
    report.v.assign(mdp.num_states, 0.0);
    for (StateId s = 0; s < mdp.num_states; ++s)
        if (!report.q[s].empty())
            report.v[s] = detail::state_value(spec, report.q[s], temps[s]);
    report.policy = detail::policy_from_q(mdp, spec, report.q, temps);
    const double residual = bellman_residual(mdp, spec, report.q, temps);
    if (residual < opts.tol)
        report.status = SolveStatus::converged;
    report.note = "steps=" + std::to_string(total_steps) + " bellman_residual=" + format_double(residual);
    return report;
}

// Undiscounted convergence predicate -------------------------------------------

struct StateCondition {
    StateId state = 0;
    double exp_sum = 0.0;  // sum_a exp(R(s, a) / effective temperature)
    bool below_one = false;
};

struct ConvergenceCheck {
    bool holds = false;
    double max_reward = -std::numeric_limits<double>::infinity();
    std::vector<StateCondition> states;
};

/// Sufficient condition for a solution of the undiscounted soft Bellman
/// equation on deterministic dynamics. Non-decoupled: sum_a exp(R(s, a) / tau)
/// < 1 at every non-terminal state. Decoupled: the largest reward is below
/// -tau. Assumes a terminal state is reachable from every state; per-state sums
/// are reported at the effective temperatures either way.
inline ConvergenceCheck check_undiscounted_convergence(const TabularMDP& mdp, double tau, bool decoupled) {
    if (!(tau > 0.0))
        throw std::invalid_argument("check_undiscounted_convergence: tau must be positive");
    if (mdp.gamma != 1.0)
        throw std::invalid_argument("check_undiscounted_convergence: requires gamma = 1");
    if (!mdp.is_deterministic())
        throw std::invalid_argument("check_undiscounted_convergence: requires deterministic transitions");

    const RegularizerSpec spec = RegularizerSpec::entropy(decoupled);
    ConvergenceCheck out;
    bool all_below = true;
    for (StateId s = 0; s < mdp.num_states; ++s) {
        const auto& row = mdp.actions[s];
        if (row.empty())
            continue;
        const double temp = effective_temperature(spec, tau, row.size());
        StateCondition cond{s, 0.0, false};
        for (const auto& a : row) {
            cond.exp_sum += std::exp(a.reward / temp);
            out.max_reward = std::max(out.max_reward, a.reward);
        }
        cond.below_one = cond.exp_sum < 1.0;
        all_below = all_below && cond.below_one;
        out.states.push_back(cond);
    }
    out.holds = decoupled ? out.max_reward < -tau : all_below;
    return out;
}

// Expected hitting time --------------------------------------------------------

struct HittingTimeOptions {
    double tol = 1e-10;  // relative sup-norm change between sweeps
    int max_sweeps = 10'000'000;
};

struct HittingTimes {
    VTable steps;                // +inf where absorption is not certain
    std::vector<bool> infinite;
    bool converged = false;
    int sweeps = 0;
};

/// Expected number of steps to a terminal state under `policy`, from the fixed
/// point E(s) = 1 + sum_a pi(a|s) sum_s' P(s'|s, a) E(s'), E = 0 at terminals.
/// States from which some state that cannot reach a terminal is reachable are
/// flagged infinite before iterating.
inline HittingTimes expected_hitting_time(const TabularMDP& mdp, const PolicyTable& policy,
                                          HittingTimeOptions opts = {}) {
    if (policy.size() != mdp.num_states)
        throw std::invalid_argument("expected_hitting_time: policy has wrong number of rows");
    for (StateId s = 0; s < mdp.num_states; ++s)
        if (policy[s].size() != mdp.num_actions(s) || (!policy[s].empty() && !is_distribution(policy[s], 1e-9)))
            throw std::invalid_argument("expected_hitting_time: invalid policy row at state " + std::to_string(s));

    const std::size_t n = mdp.num_states;
    std::vector<std::vector<StateId>> predecessors(n);
    for (StateId s = 0; s < n; ++s)
        for (std::size_t a = 0; a < mdp.actions[s].size(); ++a)
            if (policy[s][a] > 0.0)
                for (const auto& tr : mdp.actions[s][a].next)
                    if (tr.prob > 0.0)
                        predecessors[tr.next].push_back(s);

    const auto backward_closure = [&](std::vector<bool> marked) {
        std::vector<StateId> stack;
        for (StateId s = 0; s < n; ++s)
            if (marked[s])
                stack.push_back(s);
        while (!stack.empty()) {
            const StateId s = stack.back();
            stack.pop_back();
            for (StateId p : predecessors[s])
                if (!marked[p]) {
                    marked[p] = true;
                    stack.push_back(p);
                }
        }
        return marked;
    };

    std::vector<bool> terminal(n, false);
    for (StateId t : mdp.terminals)
        terminal[t] = true;
    const auto reaches_terminal = backward_closure(terminal);
    std::vector<bool> trapped(n);
    for (StateId s = 0; s < n; ++s)
        trapped[s] = !reaches_terminal[s];

    HittingTimes out;
    out.infinite = backward_closure(trapped);
    out.steps.assign(n, 0.0);
    for (StateId s = 0; s < n; ++s)
        if (out.infinite[s])
            out.steps[s] = std::numeric_limits<double>::infinity();

    // Gauss-Seidel sweeps, alternating direction.
    for (int sweep = 1; sweep <= opts.max_sweeps; ++sweep) {
        double change = 0.0, scale = 1.0;
        for (std::size_t k = 0; k < n; ++k) {
            const StateId s = sweep % 2 ? k : n - 1 - k;
            if (out.infinite[s] || mdp.actions[s].empty())
                continue;
            double e = 1.0;
            for (std::size_t a = 0; a < mdp.actions[s].size(); ++a) {
                const double pa = policy[s][a];
                if (pa == 0.0)
                    continue;
                double acc = 0.0;
                for (const auto& tr : mdp.actions[s][a].next)
                    acc += tr.prob * out.steps[tr.next];
                e += pa * acc;
            }
            change = std::max(change, std::abs(e - out.steps[s]));
            scale = std::max(scale, e);
            out.steps[s] = e;
        }
        out.sweeps = sweep;
        if (change <= opts.tol * scale) {
            out.converged = true;
            break;
        }
    }
    return out;
}

// Temperature controller -------------------------------------------------------

/// Dual ascent on log tau: the temperature rises while the measured entropy is
/// below the target and falls while it is above.
inline double dual_temperature_step(double log_tau, double measured_entropy, double target, double step) {
    if (!(step > 0.0))
        throw std::invalid_argument("dual_temperature_step: step must be positive");
    return log_tau + step * (target - measured_entropy);
}

struct AutoTempOptions {
    double alpha = 1.0;
    double min_entropy = 0.0;
    double step = 1e-2;          // dual step size on log tau
    double initial_tau = 1.0;
    double tau_ceiling = 1e6;    // reaching it flags the target as infeasible
    double tau_floor = 1e-6;
    double entropy_tol = 1e-6;   // |measured - target| that stops the controller
    int max_outer = 10'000;
    double visitation_tol = 1e-12;

    void validate() const {
        TargetEntropySpec{alpha, min_entropy}.validate();
        if (!(step > 0.0))
            throw std::invalid_argument("AutoTempOptions: step must be positive");
        if (!(initial_tau > 0.0 && tau_floor > 0.0 && tau_ceiling > tau_floor))
            throw std::invalid_argument("AutoTempOptions: need 0 < tau_floor < tau_ceiling and tau > 0");
        if (!(entropy_tol > 0.0) || max_outer < 1)
            throw std::invalid_argument("AutoTempOptions: entropy_tol and max_outer must be positive");
    }
};

/// Discounted state visitation d = mu0 + gamma P_pi^T d, normalized over
/// non-terminal states. Requires gamma < 1.
inline std::vector<double> discounted_visitation(const TabularMDP& mdp, const PolicyTable& policy,
                                                 double tol = 1e-12, int max_iter = 1'000'000) {
    if (!(mdp.gamma < 1.0))
        throw std::invalid_argument("discounted_visitation: requires gamma < 1");
    const std::size_t n = mdp.num_states;
    std::vector<double> start(n, 0.0);
    for (const auto& tr : mdp.initial)
        start[tr.next] += tr.prob;

    std::vector<double> d = start, next(n);
    for (int it = 0; it < max_iter; ++it) {
        next = start;
        for (StateId s = 0; s < n; ++s) {
            if (d[s] == 0.0)
                continue;
            for (std::size_t a = 0; a < mdp.actions[s].size(); ++a) {
                const double mass = mdp.gamma * d[s] * policy[s][a];
                if (mass == 0.0)
                    continue;
                for (const auto& tr : mdp.actions[s][a].next)
                    next[tr.next] += mass * tr.prob;
            }
        }
        double change = 0.0;
        for (StateId s = 0; s < n; ++s)
            change = std::max(change, std::abs(next[s] - d[s]));
        d.swap(next);
        if (change < tol)
            break;
    }

    double total = 0.0;
    for (StateId s = 0; s < n; ++s) {
        if (mdp.actions[s].empty())
            d[s] = 0.0;
        total += d[s];
    }
    if (total > 0.0)
        for (double& x : d)
            x /= total;
    return d;
}

struct EntropyMeasurement {
    double measured = 0.0;
    double target = 0.0;
};

/// Visitation-weighted policy entropy and entropy target.
inline EntropyMeasurement measure_entropy(const TabularMDP& mdp, const PolicyTable& policy,
                                          const TargetEntropySpec& target, double visitation_tol = 1e-12) {
    const auto weights = discounted_visitation(mdp, policy, visitation_tol);
    EntropyMeasurement out;
    for (StateId s = 0; s < mdp.num_states; ++s) {
        if (weights[s] == 0.0 || policy[s].empty())
            continue;
        out.measured += weights[s] * discrete_entropy(policy[s]);
        out.target += weights[s] * target_entropy(target, policy[s].size());
    }
    return out;
}

/// Alternates a soft value iteration solve at the current temperature with a
/// dual step on log tau toward the visitation-weighted entropy target. The
/// trace records one row per outer step (residual = |measured - target|).
inline SolveReport solve_with_auto_temperature(const TabularMDP& mdp, const RegularizerSpec& spec,
                                               const AutoTempOptions& autotemp, const SolveOptions& opts = {}) {
    autotemp.validate();
    if (!(mdp.gamma < 1.0))
        throw std::invalid_argument("solve_with_auto_temperature: requires gamma < 1");
    const TargetEntropySpec target{autotemp.alpha, autotemp.min_entropy};

    std::vector<IterationRecord> outer_trace;
    std::vector<double> trajectory;
    double log_tau = std::log(autotemp.initial_tau);
    VTable warm(mdp.num_states, 0.0);

    const auto finish = [&](SolveReport inner, SolveStatus status) {
        inner.status = status;
        inner.trace = std::move(outer_trace);
        inner.iterations = static_cast<int>(inner.trace.size());
        inner.temperature_trajectory = std::move(trajectory);
        return inner;
    };

    for (int outer = 1; outer <= autotemp.max_outer; ++outer) {
        const double tau = std::exp(log_tau);
        SolveReport inner = detail::soft_value_iteration_from(mdp, spec, tau, opts, warm);
        trajectory.push_back(tau);
        if (inner.status != SolveStatus::converged) {
            const SolveStatus status = inner.status;
            inner.note = "inner solve " + to_string(status) + " at tau=" + format_double(tau);
            return finish(std::move(inner), status);
        }
        warm = inner.v;
        const auto m = measure_entropy(mdp, inner.policy, target, autotemp.visitation_tol);
        const double gap = std::abs(m.measured - m.target);
        double max_abs = 0.0;
        for (double x : inner.v)
            max_abs = std::max(max_abs, std::abs(x));
        outer_trace.push_back({outer, gap, max_abs, tau});
        if (gap < autotemp.entropy_tol) {
            inner.note = "entropy target met";
            return finish(std::move(inner), SolveStatus::converged);
        }

        log_tau = dual_temperature_step(log_tau, m.measured, m.target, autotemp.step);
        if (log_tau >= std::log(autotemp.tau_ceiling)) {
            SolveReport capped =
                detail::soft_value_iteration_from(mdp, spec, autotemp.tau_ceiling, opts, warm);
            trajectory.push_back(autotemp.tau_ceiling);
            capped.target_infeasible = true;
            capped.note = "target-infeasible: temperature reached the ceiling";
            const SolveStatus status = capped.status;
            return finish(std::move(capped), status);
        }
        log_tau = std::max(log_tau, std::log(autotemp.tau_floor));
    }

    SolveReport last = detail::soft_value_iteration_from(mdp, spec, std::exp(log_tau), opts, warm);
    last.note = "controller hit the outer iteration cap";
    return finish(std::move(last), SolveStatus::max_iter);
}

}  // namespace decoupled
