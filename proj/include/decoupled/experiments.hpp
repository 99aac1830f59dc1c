#pragma once

// Experiment commands behind the command-line tool. Each command writes its
// artifact to `out`, diagnostics to `err`, and returns the process exit code.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "decoupled/format.hpp"
#include "decoupled/mdp.hpp"
#include "decoupled/mdp_io.hpp"
#include "decoupled/oracles.hpp"
#include "decoupled/regularizers.hpp"
#include "decoupled/report_io.hpp"
#include "decoupled/solver.hpp"

#ifndef DECOUPLED_VERSION
#define DECOUPLED_VERSION "dev"
#endif

namespace decoupled {

inline constexpr const char* tool_name = "decoupled-rl";
inline constexpr const char* tool_version = DECOUPLED_VERSION;

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int usage = 1;
inline constexpr int diverged = 2;
inline constexpr int max_iter = 3;
inline constexpr int mismatch = 4;
}  // namespace exit_code

// MDP sources ------------------------------------------------------------------

/// A built-in builder with parameters (`path:n=3,r=-1`, `loop:n=..,r=..`,
/// `grid:n=..,m=..`) or the path of an MDP document.
struct MdpSource {
    std::string builder;  // empty for files
    std::size_t n = 1;
    double r = 0.0;
    std::size_t m = 2;
    std::string file;

    std::string describe() const {
        if (builder.empty())
            return file;
        if (builder == "grid")
            return "grid:n=" + std::to_string(n) + ",m=" + std::to_string(m);
        return builder + ":n=" + std::to_string(n) + ",r=" + format_double(r);
    }
};

inline MdpSource parse_mdp_source(const std::string& text) {
    MdpSource src;
    const std::size_t colon = text.find(':');
    const std::string head = text.substr(0, colon);
    if (colon == std::string::npos || (head != "path" && head != "loop" && head != "grid")) {
        src.file = text;
        return src;
    }
    src.builder = head;
    bool seen_n = false, seen_second = false;
    std::stringstream params(text.substr(colon + 1));
    std::string item;
    const auto fail = [&](const std::string& why) {
        return std::invalid_argument("invalid --mdp '" + text + "': " + why);
    };
    while (std::getline(params, item, ',')) {
        const std::size_t eq = item.find('=');
        if (eq == std::string::npos)
            throw fail("expected key=value, got '" + item + "'");
        const std::string key = item.substr(0, eq);
        const std::string value = item.substr(eq + 1);
        double parsed = 0.0;
        try {
            parsed = parse_double(value);
        } catch (const std::invalid_argument& e) {
            throw fail(e.what());
        }
        const auto as_count = [&](double x) {
            if (!(x >= 1.0) || x != std::floor(x) || x > 1e9)
                throw fail("'" + key + "' must be a positive integer");
            return static_cast<std::size_t>(x);
        };
        if (key == "n" && !seen_n) {
            src.n = as_count(parsed);
            seen_n = true;
        } else if (key == "r" && src.builder != "grid" && !seen_second) {
            src.r = parsed;
            seen_second = true;
        } else if (key == "m" && src.builder == "grid" && !seen_second) {
            src.m = as_count(parsed);
            seen_second = true;
        } else {
            throw fail("unknown or repeated parameter '" + key + "'");
        }
    }
    if (!seen_n || !seen_second)
        throw fail(src.builder == "grid" ? "needs n and m" : "needs n and r");
    return src;
}

inline TabularMDP build_mdp(const MdpSource& src, std::optional<double> gamma, std::size_t max_states = 10'000'000) {
    TabularMDP mdp;
    if (src.builder.empty()) {
        mdp = load_mdp(src.file);
    } else if (src.builder == "path") {
        mdp = build_path_mdp(src.n, src.r);
    } else if (src.builder == "loop") {
        mdp = build_loop_mdp(src.n, src.r);
    } else {
        HypergridOptions opts;
        opts.max_states = max_states;
        mdp = build_hypergrid(src.n, src.m, opts);
    }
    if (gamma) {
        if (!(*gamma > 0.0 && *gamma <= 1.0))
            throw std::invalid_argument("--gamma must lie in (0, 1]");
        mdp.gamma = *gamma;
    }
    return mdp;
}

inline int exit_code_for(SolveStatus status) {
    switch (status) {
        case SolveStatus::converged: return exit_code::ok;
        case SolveStatus::diverged: return exit_code::diverged;
        case SolveStatus::max_iter: return exit_code::max_iter;
    }
    return exit_code::usage;
}

namespace detail {

using ConfigPairs = std::vector<std::pair<std::string, std::string>>;

inline void write_csv_preamble(std::ostream& out, const ConfigPairs& config) {
    out << "# tool=" << tool_name << " version=" << tool_version << '\n';
    out << "# config";
    for (const auto& [k, v] : config)
        out << ' ' << k << '=' << v;
    out << '\n';
}

inline nlohmann::json meta_json(const ConfigPairs& config) {
    nlohmann::json cfg = nlohmann::json::object();
    for (const auto& [k, v] : config)
        cfg[k] = v;
    return {{"tool", tool_name}, {"version", tool_version}, {"config", std::move(cfg)}};
}

inline std::string bool_text(bool b) { return b ? "true" : "false"; }

inline std::string join(const std::vector<std::string>& items, char sep = ';') {
    std::string out;
    for (const auto& s : items) {
        if (!out.empty())
            out += sep;
        out += s;
    }
    return out;
}

inline double start_value(const TabularMDP& mdp, const VTable& v) {
    return v.empty() || mdp.initial.empty() ? std::numeric_limits<double>::quiet_NaN() : v[mdp.initial.front().next];
}

}  // namespace detail

// solve --------------------------------------------------------------------------

struct SolveConfig {
    std::string mdp = "path:n=4,r=0";
    std::string reg = "entropy";
    bool decoupled = false;  // ORed with a `:decoupled` token suffix
    double tau = 1.0;
    std::optional<double> gamma;
    std::optional<double> alpha;  // switches on the temperature controller
    double min_entropy = 0.0;
    double step = 1e-2;
    double tau_ceiling = 1e6;
    std::string method = "vi";  // vi | sql
    std::size_t episodes = 10'000;
    double learning_rate = 1.0;
    SolveOptions solve;
    std::string format = "json";  // json | csv (residual trace)
    std::uint64_t seed = 0;
};

inline int cmd_solve(const SolveConfig& cfg, std::ostream& out, std::ostream& err) {
    RegularizerSpec spec;
    TabularMDP mdp;
    MdpSource src;
    try {
        spec = parse_regularizer(cfg.reg);
        spec.decoupled = spec.decoupled || cfg.decoupled;
        src = parse_mdp_source(cfg.mdp);
        mdp = build_mdp(src, cfg.gamma);
        if (cfg.format != "json" && cfg.format != "csv")
            throw std::invalid_argument("--format must be csv or json, got '" + cfg.format + "'");
        if (cfg.method != "vi" && cfg.method != "sql")
            throw std::invalid_argument("--method must be vi or sql, got '" + cfg.method + "'");
        if (!(cfg.tau > 0.0))
            throw std::invalid_argument("--tau must be positive");
        cfg.solve.validate();
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_code::usage;
    }

    const detail::ConfigPairs config{{"command", "solve"},
                                     {"mdp", src.describe()},
                                     {"reg", to_token(spec)},
                                     {"tau", format_double(cfg.tau)},
                                     {"gamma", format_double(mdp.gamma)},
                                     {"alpha", cfg.alpha ? format_double(*cfg.alpha) : "none"},
                                     {"min_entropy", format_double(cfg.min_entropy)},
                                     {"method", cfg.method},
                                     {"tol", format_double(cfg.solve.tol)},
                                     {"max_iter", std::to_string(cfg.solve.max_iter)},
                                     {"seed", std::to_string(cfg.seed)}};

    SolveReport report;
    try {
        if (cfg.alpha) {
            AutoTempOptions autotemp;
            autotemp.alpha = *cfg.alpha;
            autotemp.min_entropy = cfg.min_entropy;
            autotemp.step = cfg.step;
            autotemp.initial_tau = cfg.tau;
            autotemp.tau_ceiling = cfg.tau_ceiling;
            report = solve_with_auto_temperature(mdp, spec, autotemp, cfg.solve);
        } else if (cfg.method == "sql") {
            SqlOptions sql;
            sql.episodes = cfg.episodes;
            sql.learning_rate = cfg.learning_rate;
            sql.seed = cfg.seed;
            report = decoupled_sql(mdp, spec, cfg.tau, sql);
        } else {
            report = soft_value_iteration(mdp, spec, cfg.tau, cfg.solve);
        }
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return exit_code::usage;
    }

    if (cfg.format == "json") {
        nlohmann::json doc = detail::meta_json(config);
        doc["report"] = report_to_json(report);
        out << doc.dump(2) << '\n';
    } else {
        detail::write_csv_preamble(out, config);
        write_trace_csv(out, report);
    }

    err << "status: " << to_string(report.status) << " after " << report.iterations << " iterations";
    if (!report.note.empty())
        err << " (" << report.note << ')';
    err << '\n';
    if (report.target_infeasible)
        return exit_code::max_iter;
    return exit_code_for(report.status);
}

// toy ----------------------------------------------------------------------------

struct ToyConfig {
    std::vector<std::size_t> ns{1, 2, 4, 8, 16, 32, 64};
    std::vector<double> rs{-2.0, -1.0, 0.0};
    double tau = 1.0;
    SolveOptions solve;
    std::uint64_t seed = 0;
};

/// Both toy MDPs with and without decoupling, solver next to closed form.
inline int cmd_toy(const ToyConfig& cfg, std::ostream& out, std::ostream& err) {
    if (!(cfg.tau > 0.0)) {
        err << "error: --tau must be positive\n";
        return exit_code::usage;
    }
    std::vector<std::string> ns, rs;
    for (auto n : cfg.ns)
        ns.push_back(std::to_string(n));
    for (auto r : cfg.rs)
        rs.push_back(format_double(r));
    detail::write_csv_preamble(out, {{"command", "toy"},
                                     {"n", detail::join(ns)},
                                     {"r", detail::join(rs)},
                                     {"tau", format_double(cfg.tau)},
                                     {"tol", format_double(cfg.solve.tol)},
                                     {"max_iter", std::to_string(cfg.solve.max_iter)},
                                     {"seed", std::to_string(cfg.seed)}});
    out << "experiment,n,r,tau,decoupled,status,v_s1,prob_a0,oracle_v_s1,oracle_prob_a0,oracle_diverges\n";
    for (const char* experiment : {"path", "loop"}) {
        const bool is_path = std::string(experiment) == "path";
        for (bool dec : {false, true})
            for (auto n : cfg.ns)
                for (double r : cfg.rs) {
                    const TabularMDP mdp = is_path ? build_path_mdp(n, r) : build_loop_mdp(n, r);
                    const auto report = soft_value_iteration(mdp, RegularizerSpec::entropy(dec), cfg.tau, cfg.solve);
                    std::optional<OracleResult> oracle;
                    try {
                        oracle = is_path ? path_oracle(n, r, cfg.tau, dec) : loop_oracle(n, r, cfg.tau, dec);
                    } catch (const OracleDomainError&) {
                    }
                    const bool solved = report.status == SolveStatus::converged;
                    out << experiment << ',' << n << ',' << format_double(r) << ',' << format_double(cfg.tau) << ','
                        << detail::bool_text(dec) << ',' << to_string(report.status) << ','
                        << (solved ? format_double(report.v[0]) : "nan") << ','
                        << (solved ? format_double(report.policy[0][0]) : "nan") << ','
                        << (oracle ? format_double(oracle->value) : "na") << ','
                        << (oracle ? format_double(oracle->prob_a0) : "na") << ','
                        << (oracle ? detail::bool_text(oracle->diverges) : "na") << '\n';
                }
    }
    return exit_code::ok;
}

// hypergrid ----------------------------------------------------------------------

struct HypergridConfig {
    std::size_t n_min = 1;
    std::size_t n_max = 4;
    std::size_t m = 4;
    double tau = 0.4;
    double gamma = 0.99;
    std::string reg = "entropy";
    std::size_t max_states = 10'000'000;
    SolveOptions solve;
    std::uint64_t seed = 0;
};

struct HypergridRow {
    std::size_t n = 0;
    std::size_t m = 0;
    bool decoupled = false;
    double expected_length = std::numeric_limits<double>::infinity();
    std::string status;
    std::size_t shortest_path = 0;
};

/// Solves one hypergrid and measures the expected episode length from the start state.
inline HypergridRow hypergrid_episode_length(std::size_t n, std::size_t m, RegularizerSpec spec, double tau,
                                             double gamma, const SolveOptions& solve,
                                             std::size_t max_states = 10'000'000) {
    HypergridOptions opts;
    opts.gamma = gamma;
    opts.max_states = max_states;
    const TabularMDP mdp = build_hypergrid(n, m, opts);
    const auto report = soft_value_iteration(mdp, spec, tau, solve);
    HypergridRow row{n, m, spec.decoupled, std::numeric_limits<double>::infinity(), to_string(report.status),
                     hypergrid_shortest_path(n, m)};
    if (report.status != SolveStatus::converged)
        return row;
    const auto hitting = expected_hitting_time(mdp, report.policy);
    const StateId start = mdp.initial.front().next;
    if (!hitting.infinite[start] && hitting.converged)
        row.expected_length = hitting.steps[start];
    else if (!hitting.converged)
        row.status = "hitting-time-max-iter";
    return row;
}

inline int cmd_hypergrid(const HypergridConfig& cfg, std::ostream& out, std::ostream& err) {
    RegularizerSpec spec;
    try {
        spec = parse_regularizer(cfg.reg);
        if (cfg.n_min < 1 || cfg.n_max < cfg.n_min)
            throw std::invalid_argument("need 1 <= --n-min <= --n-max");
        if (cfg.m < 2)
            throw std::invalid_argument("--m must be at least 2");
        if (!(cfg.tau > 0.0) || !(cfg.gamma > 0.0 && cfg.gamma <= 1.0))
            throw std::invalid_argument("need --tau > 0 and --gamma in (0, 1]");
        for (std::size_t n = cfg.n_min; n <= cfg.n_max; ++n)
            if (!hypergrid_size(n, cfg.m, cfg.max_states))
                throw CapacityError("hypergrid n=" + std::to_string(n) + ", m=" + std::to_string(cfg.m) +
                                    " exceeds the state budget of " + std::to_string(cfg.max_states));
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_code::usage;
    }

    spec.decoupled = false;
    detail::write_csv_preamble(out, {{"command", "hypergrid"},
                                     {"n_min", std::to_string(cfg.n_min)},
                                     {"n_max", std::to_string(cfg.n_max)},
                                     {"m", std::to_string(cfg.m)},
                                     {"reg", to_token(spec)},
                                     {"tau", format_double(cfg.tau)},
                                     {"gamma", format_double(cfg.gamma)},
                                     {"tol", format_double(cfg.solve.tol)},
                                     {"seed", std::to_string(cfg.seed)}});
    out << "n,m,decoupled,expected_episode_length,status,shortest_path\n";
    for (std::size_t n = cfg.n_min; n <= cfg.n_max; ++n)
        for (bool dec : {false, true}) {
            spec.decoupled = dec;
            const auto row = hypergrid_episode_length(n, cfg.m, spec, cfg.tau, cfg.gamma, cfg.solve, cfg.max_states);
            out << row.n << ',' << row.m << ',' << detail::bool_text(row.decoupled) << ','
                << format_double(row.expected_length) << ',' << row.status << ',' << row.shortest_path << '\n';
        }
    return exit_code::ok;
}

// sweep --------------------------------------------------------------------------

struct SweepConfig {
    std::string builder = "path";  // path | loop | grid
    std::vector<std::size_t> ns{4};
    std::vector<double> rs{0.0};       // path and loop
    std::vector<std::size_t> ms{4};    // grid
    std::vector<std::string> regs{"entropy"};
    std::vector<bool> decoupled{false, true};
    std::vector<double> taus{1.0};
    std::vector<double> alphas;        // empty: fixed temperature
    std::optional<double> gamma;
    SolveOptions solve;
    std::uint64_t seed = 0;
    unsigned workers = 1;
};

struct SweepCell {
    std::size_t index = 0;
    std::size_t n = 0;
    double r = 0.0;
    std::size_t m = 0;
    std::string reg;
    bool decoupled = false;
    double tau = 0.0;
    std::optional<double> alpha;
};

inline std::vector<SweepCell> sweep_cells(const SweepConfig& cfg) {
    std::vector<SweepCell> cells;
    const bool grid = cfg.builder == "grid";
    const std::vector<std::optional<double>> alphas = [&] {
        std::vector<std::optional<double>> a;
        if (cfg.alphas.empty())
            a.push_back(std::nullopt);
        for (double x : cfg.alphas)
            a.push_back(x);
        return a;
    }();
    const std::size_t second = grid ? cfg.ms.size() : cfg.rs.size();
    for (auto n : cfg.ns)
        for (std::size_t j = 0; j < second; ++j)
            for (const auto& reg : cfg.regs)
                for (bool dec : cfg.decoupled)
                    for (double tau : cfg.taus)
                        for (const auto& alpha : alphas) {
                            SweepCell c;
                            c.index = cells.size();
                            c.n = n;
                            c.r = grid ? 0.0 : cfg.rs[j];
                            c.m = grid ? cfg.ms[j] : 0;
                            c.reg = reg;
                            c.decoupled = dec;
                            c.tau = tau;
                            c.alpha = alpha;
                            cells.push_back(c);
                        }
    return cells;
}

inline std::string run_sweep_cell(const SweepConfig& cfg, const SweepCell& cell) {
    std::ostringstream row;
    row << cell.index << ',' << cfg.builder << ',' << cell.n << ',' << format_double(cell.r) << ',' << cell.m << ','
        << csv_field(cell.reg) << ',' << detail::bool_text(cell.decoupled) << ',' << format_double(cell.tau) << ','
        << (cell.alpha ? format_double(*cell.alpha) : "none") << ',';
    try {
        RegularizerSpec spec = parse_regularizer(cell.reg);
        spec.decoupled = spec.decoupled || cell.decoupled;
        MdpSource src;
        src.builder = cfg.builder;
        src.n = cell.n;
        src.r = cell.r;
        src.m = cell.m;
        const TabularMDP mdp = build_mdp(src, cfg.gamma);
        SolveReport report;
        if (cell.alpha) {
            AutoTempOptions autotemp;
            autotemp.alpha = *cell.alpha;
            autotemp.initial_tau = cell.tau;
            report = solve_with_auto_temperature(mdp, spec, autotemp, cfg.solve);
        } else {
            report = soft_value_iteration(mdp, spec, cell.tau, cfg.solve);
        }
        std::string oracle = "na";
        if (cfg.builder == "loop" && spec.kind == RegularizerKind::neg_entropy && mdp.gamma == 1.0)
            oracle = detail::bool_text(loop_oracle(cell.n, cell.r, cell.tau, spec.decoupled).diverges);
        const StateId start = mdp.initial.front().next;
        const bool have_policy = report.status == SolveStatus::converged && !report.policy[start].empty();
        row << format_double(mdp.gamma) << ',' << to_string(report.status) << ',' << report.iterations << ','
            << (report.status == SolveStatus::converged ? format_double(detail::start_value(mdp, report.v)) : "nan")
            << ',' << (have_policy ? format_double(report.policy[start][0]) : "nan") << ','
            << format_double(report.temperature) << ',' << oracle << ','
            << (report.target_infeasible ? "target-infeasible" : "");
    } catch (const std::exception& e) {
        std::string what = e.what();
        std::replace(what.begin(), what.end(), '\n', ' ');
        row << ",error,0,nan,nan,nan,na," << csv_field(what);
    }
    return row.str();
}

/// Every grid cell solved independently; rows come out in grid order no matter
/// which worker finished first.
inline int cmd_sweep(const SweepConfig& cfg, std::ostream& out, std::ostream& err) {
    if (cfg.builder != "path" && cfg.builder != "loop" && cfg.builder != "grid") {
        err << "error: --builder must be path, loop or grid\n";
        return exit_code::usage;
    }
    try {
        for (const auto& reg : cfg.regs)
            parse_regularizer(reg);
        cfg.solve.validate();
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_code::usage;
    }
    const auto cells = sweep_cells(cfg);
    std::vector<std::string> rows(cells.size());
    std::atomic<std::size_t> next{0};
    const auto work = [&] {
        for (std::size_t i = next++; i < cells.size(); i = next++)
            rows[i] = run_sweep_cell(cfg, cells[i]);
    };
    const unsigned workers = std::max(1u, std::min<unsigned>(cfg.workers, static_cast<unsigned>(cells.size())));
    std::vector<std::thread> pool;
    for (unsigned w = 1; w < workers; ++w)
        pool.emplace_back(work);
    work();
    for (auto& t : pool)
        t.join();

    const auto list = [](const auto& xs, auto fmt) {
        std::vector<std::string> items;
        for (const auto& x : xs)
            items.push_back(fmt(x));
        return detail::join(items);
    };
    const auto num = [](double x) { return format_double(x); };
    const auto count = [](std::size_t x) { return std::to_string(x); };
    detail::write_csv_preamble(
        out, {{"command", "sweep"},
              {"builder", cfg.builder},
              {"n", list(cfg.ns, count)},
              {"r", list(cfg.rs, num)},
              {"m", list(cfg.ms, count)},
              {"reg", list(cfg.regs, [](const std::string& s) { return s; })},
              {"decoupled", list(cfg.decoupled, [](bool b) { return detail::bool_text(b); })},
              {"tau", list(cfg.taus, num)},
              {"alpha", cfg.alphas.empty() ? std::string("none") : list(cfg.alphas, num)},
              {"gamma", cfg.gamma ? format_double(*cfg.gamma) : "builder"},
              {"tol", format_double(cfg.solve.tol)},
              {"max_iter", std::to_string(cfg.solve.max_iter)},
              {"seed", std::to_string(cfg.seed)}});
    out << "index,builder,n,r,m,reg,decoupled,tau,alpha,gamma,status,iterations,v_start,prob_a0,final_tau,"
           "oracle_diverges,error\n";
    for (const auto& row : rows)
        out << row << '\n';
    return exit_code::ok;
}

// verify -------------------------------------------------------------------------

struct VerifyConfig {
    std::vector<std::size_t> path_ns{1, 2, 3, 4, 8, 16};
    std::vector<double> path_rs{-2.0, 0.0, 2.0};
    std::vector<double> taus{0.5, 1.0, 2.0};
    std::vector<std::size_t> loop_ns{1, 2, 3, 4, 8};
    std::vector<double> loop_rs{-3.0, -2.0, -1.5, -1.0, -0.5, 0.0};
    std::size_t harness_n_max = 100;
    double tolerance = 1e-8;
    double temperature_scale = 1.0;  // fault injection for negative-control tests
    std::uint64_t seed = 0;
};

/// Oracle grids for both toy MDPs plus the regularizer harness. Exit 0 when
/// everything agrees, 4 otherwise.
inline int cmd_verify(const VerifyConfig& cfg, std::ostream& out, std::ostream& err) {
    SolveOptions solve;
    solve.tol = 1e-12;
    solve.max_iter = 100'000;

    std::size_t failures = 0, skipped = 0, cases = 0;
    double worst = 0.0;
    std::string worst_case = "none";
    out << "suite,case,result,deviation\n";
    const auto record = [&](const std::string& suite, const std::string& name, bool pass, double deviation,
                            const std::string& note = "") {
        ++cases;
        if (!pass)
            ++failures;
        if (deviation > worst || (!pass && worst_case == "none")) {
            worst = std::max(worst, deviation);
            worst_case = suite + ' ' + name;
        }
        out << suite << ',' << csv_field(name) << ',' << (pass ? "pass" : "FAIL") << ','
            << format_double(deviation) << (note.empty() ? "" : " " + note) << '\n';
    };

    for (bool dec : {false, true})
        for (auto n : cfg.path_ns)
            for (double r : cfg.path_rs)
                for (double tau : cfg.taus) {
                    const std::string name = "n=" + std::to_string(n) + " r=" + format_double(r) +
                                             " tau=" + format_double(tau) + " decoupled=" + detail::bool_text(dec);
                    OracleResult oracle;
                    try {
                        oracle = path_oracle(n, r, tau, dec);
                    } catch (const OracleDomainError& e) {
                        ++skipped;
                        out << "path," << csv_field(name) << ",skipped,0 " << csv_field(e.what()) << '\n';
                        continue;
                    }
                    const auto report = soft_value_iteration(build_path_mdp(n, r), RegularizerSpec::entropy(dec),
                                                             tau * cfg.temperature_scale, solve);
                    if (report.status != SolveStatus::converged) {
                        record("path", name, false, std::numeric_limits<double>::infinity());
                        continue;
                    }
                    const double dev = std::max({std::abs(report.v[0] - oracle.value),
                                                 std::abs(report.v[1] - oracle.value_s2),
                                                 std::abs(report.policy[0][0] - oracle.prob_a0)});
                    record("path", name, dev <= cfg.tolerance, dev);
                }

    for (bool dec : {false, true})
        for (auto n : cfg.loop_ns)
            for (double r : cfg.loop_rs)
                for (double tau : cfg.taus) {
                    const std::string name = "n=" + std::to_string(n) + " r=" + format_double(r) +
                                             " tau=" + format_double(tau) + " decoupled=" + detail::bool_text(dec);
                    const OracleResult oracle = loop_oracle(n, r, tau, dec);
                    SolveOptions loop_solve = solve;
                    loop_solve.max_iter = 10'000;
                    const auto report = soft_value_iteration(build_loop_mdp(n, r), RegularizerSpec::entropy(dec),
                                                             tau * cfg.temperature_scale, loop_solve);
                    if (oracle.diverges) {
                        record("loop", name, report.status == SolveStatus::diverged, 0.0,
                               "expected diverged got " + to_string(report.status));
                        continue;
                    }
                    if (report.status != SolveStatus::converged) {
                        record("loop", name, false, std::numeric_limits<double>::infinity(),
                               "expected converged got " + to_string(report.status));
                        continue;
                    }
                    const double dev = std::max(std::abs(report.v[0] - oracle.value),
                                                std::abs(report.policy[0][0] - oracle.prob_a0));
                    record("loop", name, dev <= cfg.tolerance, dev);
                }

    for (const auto& spec : {RegularizerSpec::entropy(), RegularizerSpec::kl_uniform(), RegularizerSpec::tsallis()}) {
        const auto harness = standard_regularizer_harness(spec, cfg.harness_n_max, HarnessOptions{cfg.seed + 7});
        for (const auto& c : harness.checks)
            record("harness", c.check + " " + c.regularizer, c.pass, 0.0, c.pass ? "" : c.witness);
    }

    err << cases << " cases, " << failures << " failed, " << skipped << " skipped (outside oracle domain)\n";
    if (failures > 0) {
        err << "worst deviation " << format_double(worst) << " at " << worst_case << '\n';
        return exit_code::mismatch;
    }
    return exit_code::ok;
}

}  // namespace decoupled
