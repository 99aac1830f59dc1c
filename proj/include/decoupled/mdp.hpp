#pragma once

// Tabular MDPs with state-dependent action sets.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "decoupled/numerics.hpp"

namespace decoupled {

using StateId = std::size_t;

struct Transition {
    StateId next = 0;
    double prob = 1.0;

    friend bool operator==(const Transition&, const Transition&) = default;
};

struct Action {
    double reward = 0.0;
    std::vector<Transition> next;

    friend bool operator==(const Action&, const Action&) = default;
};

/// Rewards are R(s, a); terminal states carry no actions and have value zero.
struct TabularMDP {
    std::size_t num_states = 0;
    std::vector<std::vector<Action>> actions;  // actions[s] is the valid action set of s
    double gamma = 1.0;
    std::vector<StateId> terminals;  // sorted, unique
    std::vector<Transition> initial;

    std::size_t num_actions(StateId s) const { return actions.at(s).size(); }

    bool is_terminal(StateId s) const {
        return std::binary_search(terminals.begin(), terminals.end(), s);
    }

    std::vector<std::size_t> actions_per_state() const {
        std::vector<std::size_t> out(num_states);
        for (StateId s = 0; s < num_states; ++s)
            out[s] = actions[s].size();
        return out;
    }

    /// Every (s, a) has exactly one successor with probability one.
    bool is_deterministic() const {
        for (const auto& row : actions)
            for (const auto& a : row)
                if (a.next.size() != 1 || a.next.front().prob != 1.0)
                    return false;
        return true;
    }

    friend bool operator==(const TabularMDP&, const TabularMDP&) = default;
};

using VTable = std::vector<double>;
using QTable = std::vector<std::vector<double>>;
using PolicyTable = std::vector<Distribution>;  // empty rows at terminal states

inline QTable zero_q_table(const TabularMDP& mdp) {
    QTable q(mdp.num_states);
    for (StateId s = 0; s < mdp.num_states; ++s)
        q[s].assign(mdp.num_actions(s), 0.0);
    return q;
}

// Validation -------------------------------------------------------------------

struct Violation {
    std::optional<StateId> state;
    std::optional<std::size_t> action;
    std::string message;

    std::string describe() const {
        std::string where;
        if (state)
            where = "s=" + std::to_string(*state);
        if (action)
            where += (where.empty() ? "a=" : ",a=") + std::to_string(*action);
        return where.empty() ? message : "(" + where + ") " + message;
    }
};

struct ValidationReport {
    std::vector<Violation> violations;

    bool ok() const { return violations.empty(); }

    std::string summary() const {
        std::string out;
        for (const auto& v : violations) {
            if (!out.empty())
                out += "; ";
            out += v.describe();
        }
        return out;
    }
};

inline ValidationReport validate(const TabularMDP& mdp, double prob_tol = 1e-12) {
    ValidationReport report;
    const auto add = [&](std::optional<StateId> s, std::optional<std::size_t> a, std::string msg) {
        report.violations.push_back({s, a, std::move(msg)});
    };

    if (mdp.num_states == 0)
        add(std::nullopt, std::nullopt, "num_states must be positive");
    if (!(mdp.gamma > 0.0 && mdp.gamma <= 1.0))
        add(std::nullopt, std::nullopt, "gamma must lie in (0, 1]");
    if (mdp.actions.size() != mdp.num_states) {
        add(std::nullopt, std::nullopt, "action table has " + std::to_string(mdp.actions.size()) +
                                            " rows for " + std::to_string(mdp.num_states) + " states");
        return report;
    }
    if (!std::is_sorted(mdp.terminals.begin(), mdp.terminals.end()) ||
        std::adjacent_find(mdp.terminals.begin(), mdp.terminals.end()) != mdp.terminals.end())
        add(std::nullopt, std::nullopt, "terminal list must be sorted and unique");
    for (StateId t : mdp.terminals)
        if (t >= mdp.num_states)
            add(t, std::nullopt, "terminal id out of range");

    double initial_sum = 0.0;
    for (const auto& tr : mdp.initial) {
        if (tr.next >= mdp.num_states)
            add(tr.next, std::nullopt, "initial state id out of range");
        if (!(tr.prob >= 0.0))
            add(tr.next, std::nullopt, "negative initial probability");
        initial_sum += tr.prob;
    }
    if (std::abs(initial_sum - 1.0) > prob_tol)
        add(std::nullopt, std::nullopt, "initial distribution sums to " + std::to_string(initial_sum));

    for (StateId s = 0; s < mdp.num_states; ++s) {
        const bool terminal = mdp.is_terminal(s);
        if (terminal && !mdp.actions[s].empty())
            add(s, std::nullopt, "terminal state has outgoing actions");
        if (!terminal && mdp.actions[s].empty())
            add(s, std::nullopt, "non-terminal state has no actions");
        for (std::size_t a = 0; a < mdp.actions[s].size(); ++a) {
            const Action& act = mdp.actions[s][a];
            if (!std::isfinite(act.reward))
                add(s, a, "reward is not finite");
            if (act.next.empty())
                add(s, a, "action has no successors");
            double sum = 0.0;
            for (const auto& tr : act.next) {
                if (tr.next >= mdp.num_states)
                    add(s, a, "next state " + std::to_string(tr.next) + " out of range");
                if (!(tr.prob >= 0.0))
                    add(s, a, "negative transition probability");
                sum += tr.prob;
            }
            if (!act.next.empty() && std::abs(sum - 1.0) > prob_tol)
                add(s, a, "transition probabilities sum to " + std::to_string(sum));
        }
    }
    return report;
}

// Builders ---------------------------------------------------------------------

/// Two routes from s1 (state 0) to the terminal s3 (state 2): action 0 goes
/// straight there, action 1 passes through s2 (state 1), which has n parallel
/// actions into s3. Reward r on both actions of s1 and zero elsewhere; no
/// discounting.
inline TabularMDP build_path_mdp(std::size_t n, double r) {
    if (n == 0)
        throw std::invalid_argument("build_path_mdp: n must be at least 1");
    TabularMDP mdp;
    mdp.num_states = 3;
    mdp.gamma = 1.0;
    mdp.actions.resize(3);
    mdp.actions[0] = {Action{r, {{2, 1.0}}}, Action{r, {{1, 1.0}}}};
    mdp.actions[1].assign(n, Action{0.0, {{2, 1.0}}});
    mdp.terminals = {2};
    mdp.initial = {{0, 1.0}};
    return mdp;
}

/// s1 (state 0) exits to the terminal s2 (state 1) with action 0 and has n
/// self-loops as actions 1..n; every transition pays r. No discounting.
inline TabularMDP build_loop_mdp(std::size_t n, double r) {
    if (n == 0)
        throw std::invalid_argument("build_loop_mdp: n must be at least 1");
    TabularMDP mdp;
    mdp.num_states = 2;
    mdp.gamma = 1.0;
    mdp.actions.resize(2);
    mdp.actions[0].reserve(n + 1);
    mdp.actions[0].push_back(Action{r, {{1, 1.0}}});
    for (std::size_t i = 0; i < n; ++i)
        mdp.actions[0].push_back(Action{r, {{0, 1.0}}});
    mdp.terminals = {1};
    mdp.initial = {{0, 1.0}};
    return mdp;
}

class CapacityError : public std::length_error {
public:
    using std::length_error::length_error;
};

struct HypergridOptions {
    double gamma = 0.99;
    std::size_t max_states = 10'000'000;
};

/// Number of hypergrid states m^n, or nullopt when it exceeds `budget`.
inline std::optional<std::size_t> hypergrid_size(std::size_t n, std::size_t m, std::size_t budget) {
    std::size_t total = 1;
    for (std::size_t i = 0; i < n; ++i) {
        if (total > budget / m)
            return std::nullopt;
        total *= m;
    }
    return total <= budget ? std::optional<std::size_t>(total) : std::nullopt;
}

/// Coordinates (1-based) of a hypergrid state; coordinate 1 varies fastest.
inline std::vector<std::size_t> hypergrid_coordinates(StateId s, std::size_t n, std::size_t m) {
    std::vector<std::size_t> coords(n);
    for (std::size_t i = 0; i < n; ++i) {
        coords[i] = s % m + 1;
        s /= m;
    }
    return coords;
}

inline StateId hypergrid_state(const std::vector<std::size_t>& coords, std::size_t m) {
    StateId s = 0;
    for (std::size_t i = coords.size(); i-- > 0;)
        s = s * m + (coords[i] - 1);
    return s;
}

/// n-dimensional grid {1..m}^n. Action 2i increments coordinate i, action
/// 2i + 1 decrements it; moves that would leave the grid keep the state. Every
/// step from a non-goal state pays -1, the goal [m, ..., m] is terminal and the
/// walk starts at [1, ..., 1].
inline TabularMDP build_hypergrid(std::size_t n, std::size_t m, HypergridOptions opts = {}) {
    if (n == 0)
        throw std::invalid_argument("build_hypergrid: n must be at least 1");
    if (m < 2)
        throw std::invalid_argument("build_hypergrid: m must be at least 2");
    const auto size = hypergrid_size(n, m, opts.max_states);
    if (!size)
        throw CapacityError("build_hypergrid: m^n exceeds the state budget of " + std::to_string(opts.max_states));

    TabularMDP mdp;
    mdp.num_states = *size;
    mdp.gamma = opts.gamma;
    mdp.actions.resize(*size);
    const StateId goal = *size - 1;

    std::vector<std::size_t> stride(n, 1);
    for (std::size_t i = 1; i < n; ++i)
        stride[i] = stride[i - 1] * m;

    for (StateId s = 0; s < goal; ++s) {
        auto& row = mdp.actions[s];
        row.reserve(2 * n);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t c = (s / stride[i]) % m;  // zero-based coordinate
            const StateId up = c + 1 < m ? s + stride[i] : s;
            const StateId down = c > 0 ? s - stride[i] : s;
            row.push_back(Action{-1.0, {{up, 1.0}}});
            row.push_back(Action{-1.0, {{down, 1.0}}});
        }
    }
    mdp.terminals = {goal};
    mdp.initial = {{0, 1.0}};
    return mdp;
}

}  // namespace decoupled
