#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "decoupled/experiments.hpp"

namespace {

using namespace decoupled;

struct Common {
    std::string out_path;
    std::uint64_t seed = 0;
};

void add_common(CLI::App* cmd, Common& common) {
    cmd->add_option("--out", common.out_path, "Write the artifact here instead of standard output");
    cmd->add_option("--seed", common.seed, "RNG seed, echoed in the output metadata");
}

void add_solve_options(CLI::App* cmd, SolveOptions& solve) {
    cmd->add_option("--tol", solve.tol, "Sup-norm residual tolerance");
    cmd->add_option("--max-iter", solve.max_iter, "Iteration cap");
}

int emit(const Common& common, const std::string& artifact) {
    if (common.out_path.empty()) {
        std::cout << artifact;
        return 0;
    }
    std::ofstream file(common.out_path, std::ios::binary);
    file << artifact;
    if (!file) {
        std::cerr << "error: cannot write '" << common.out_path << "'\n";
        return exit_code::usage;
    }
    return 0;
}

template <class Config, class Command>
int run(const Config& cfg, const Common& common, Command command) {
    std::ostringstream out;
    const int code = command(cfg, out, std::cerr);
    if (code == exit_code::usage)
        return code;
    const int written = emit(common, out.str());
    return written != 0 ? written : code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tabular regularized-MDP solver with decoupled regularizers"};
    app.set_version_flag("--version", std::string(tool_version));
    app.require_subcommand(1);

    Common common;

    SolveConfig solve;
    std::optional<double> alpha;
    std::optional<double> gamma;
    auto* solve_cmd = app.add_subcommand("solve", "Solve one MDP and write the report");
    solve_cmd->add_option("--mdp", solve.mdp, "path:n=..,r=.. | loop:n=..,r=.. | grid:n=..,m=.. | MDP file")->required();
    solve_cmd->add_option("--reg", solve.reg, "entropy | kl-uniform | tsallis:q=..,k=.. with optional :decoupled");
    solve_cmd->add_flag("--decoupled", solve.decoupled, "Divide the regularizer by its range");
    solve_cmd->add_option("--tau", solve.tau, "Temperature (initial temperature with --alpha)");
    solve_cmd->add_option("--gamma", gamma, "Discount override");
    solve_cmd->add_option("--alpha", alpha, "Target-entropy weight; enables temperature tuning");
    solve_cmd->add_option("--min-entropy", solve.min_entropy, "Entropy floor mixed in with weight 1 - alpha");
    solve_cmd->add_option("--step", solve.step, "Dual step size for temperature tuning");
    solve_cmd->add_option("--tau-ceiling", solve.tau_ceiling, "Largest temperature the tuner may reach");
    solve_cmd->add_option("--method", solve.method, "vi | sql");
    solve_cmd->add_option("--episodes", solve.episodes, "Soft Q-learning episodes");
    solve_cmd->add_option("--learning-rate", solve.learning_rate, "Soft Q-learning step size");
    solve_cmd->add_option("--format", solve.format, "json report or csv residual trace");
    add_solve_options(solve_cmd, solve.solve);
    add_common(solve_cmd, common);

    ToyConfig toy;
    auto* toy_cmd = app.add_subcommand("toy", "Path and loop MDP tables next to their closed forms");
    toy_cmd->add_option("--n", toy.ns, "Action counts")->delimiter(',');
    toy_cmd->add_option("--r", toy.rs, "Rewards")->delimiter(',');
    toy_cmd->add_option("--tau", toy.tau, "Temperature");
    add_solve_options(toy_cmd, toy.solve);
    add_common(toy_cmd, common);

    HypergridConfig grid;
    auto* grid_cmd = app.add_subcommand("hypergrid", "Expected episode length against grid dimension");
    grid_cmd->add_option("--n-min", grid.n_min, "Smallest dimension");
    grid_cmd->add_option("--n-max", grid.n_max, "Largest dimension");
    grid_cmd->add_option("--m", grid.m, "Cells per side");
    grid_cmd->add_option("--tau", grid.tau, "Temperature");
    grid_cmd->add_option("--gamma", grid.gamma, "Discount");
    grid_cmd->add_option("--reg", grid.reg, "Regularizer token (decoupling is toggled per row)");
    grid_cmd->add_option("--max-states", grid.max_states, "State budget");
    add_solve_options(grid_cmd, grid.solve);
    add_common(grid_cmd, common);

    SweepConfig sweep;
    std::vector<std::string> sweep_decoupled;
    auto* sweep_cmd = app.add_subcommand("sweep", "Grid of independent solves, one CSV row per cell");
    sweep_cmd->add_option("--builder", sweep.builder, "path | loop | grid");
    sweep_cmd->add_option("--n", sweep.ns, "Action counts or grid dimensions")->delimiter(',');
    sweep_cmd->add_option("--r", sweep.rs, "Rewards (path, loop)")->delimiter(',');
    sweep_cmd->add_option("--m", sweep.ms, "Cells per side (grid)")->delimiter(',');
    sweep_cmd->add_option("--reg", sweep.regs, "Regularizer token; repeat the flag for several");
    sweep_cmd->add_option("--decoupled", sweep_decoupled, "Subset of true,false")->delimiter(',');
    sweep_cmd->add_option("--tau", sweep.taus, "Temperatures")->delimiter(',');
    sweep_cmd->add_option("--alpha", sweep.alphas, "Target-entropy weights")->delimiter(',');
    sweep_cmd->add_option("--gamma", sweep.gamma, "Discount override");
    sweep_cmd->add_option("--workers", sweep.workers, "Concurrent cells");
    add_solve_options(sweep_cmd, sweep.solve);
    add_common(sweep_cmd, common);

    VerifyConfig verify;
    auto* verify_cmd = app.add_subcommand("verify", "Solver against oracles and the regularizer harness");
    verify_cmd->add_option("--harness-n-max", verify.harness_n_max, "Largest action count for the harness");
    verify_cmd->add_option("--tolerance", verify.tolerance, "Allowed oracle deviation");
    verify_cmd->add_option("--temperature-scale", verify.temperature_scale, "Solver temperature multiplier (fault injection)")
        ->group("");
    add_common(verify_cmd, common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_code::usage;
    }

    if (*solve_cmd) {
        solve.alpha = alpha;
        solve.gamma = gamma;
        solve.seed = common.seed;
        return run(solve, common, cmd_solve);
    }
    if (*toy_cmd) {
        toy.seed = common.seed;
        return run(toy, common, cmd_toy);
    }
    if (*grid_cmd) {
        grid.seed = common.seed;
        return run(grid, common, cmd_hypergrid);
    }
    if (*sweep_cmd) {
        sweep.seed = common.seed;
        if (!sweep_decoupled.empty()) {
            sweep.decoupled.clear();
            for (const auto& d : sweep_decoupled) {
                if (d != "true" && d != "false") {
                    std::cerr << "error: --decoupled expects true or false, got '" << d << "'\n";
                    return exit_code::usage;
                }
                sweep.decoupled.push_back(d == "true");
            }
        }
        return run(sweep, common, cmd_sweep);
    }
    verify.seed = common.seed;
    return run(verify, common, cmd_verify);
}
