#pragma once

// SolveReport serialization: a JSON document alongside the MDP format, and a
// CSV residual trace `iter,residual,max_abs_v,temperature`.

#include <ostream>
#include <string>

#include "json.hpp"

#include "decoupled/format.hpp"
#include "decoupled/solver.hpp"

namespace decoupled {

inline nlohmann::json report_to_json(const SolveReport& report) {
    using nlohmann::json;
    json policy = json::array();
    for (const auto& row : report.policy)
        policy.push_back(row);
    json out{{"status", to_string(report.status)},
             {"iterations", report.iterations},
             {"final_residual", report.trace.empty() ? 0.0 : report.trace.back().residual},
             {"temperature", report.temperature},
             {"effective_temperatures", report.effective_temperatures},
             {"values", report.v},
             {"q", report.q},
             {"policy", std::move(policy)},
             {"target_infeasible", report.target_infeasible},
             {"note", report.note}};
    if (!report.temperature_trajectory.empty())
        out["temperature_trajectory"] = report.temperature_trajectory;
    if (report.truncated_episodes > 0)
        out["truncated_episodes"] = report.truncated_episodes;
    return out;
}

inline void write_trace_csv(std::ostream& out, const SolveReport& report) {
    out << "iter,residual,max_abs_v,temperature\n";
    for (const auto& r : report.trace)
        out << r.iter << ',' << format_double(r.residual) << ',' << format_double(r.max_abs_v) << ','
            << format_double(r.temperature) << '\n';
}

}  // namespace decoupled
