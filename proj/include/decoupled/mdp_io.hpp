#pragma once

// JSON document format for tabular MDPs.
//
//   {
//     "num_states": 3,
//     "gamma": 1.0,
//     "terminals": [2],
//     "initial": [[0, 1.0]],
//     "states": [ [ {"reward": -1.0, "next": [[2, 1.0]]}, ... ], ... ]
//   }
//
// Doubles are written in shortest round-trip form, so load(save(m)) == m.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "json.hpp"

#include "decoupled/mdp.hpp"

namespace decoupled {

class MdpFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

using nlohmann::json;

inline json transitions_to_json(const std::vector<Transition>& trs) {
    json out = json::array();
    for (const auto& tr : trs)
        out.push_back(json::array({tr.next, tr.prob}));
    return out;
}

[[noreturn]] inline void format_error(const std::string& where, const std::string& what) {
    throw MdpFormatError("field '" + where + "': " + what);
}

inline void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!obj.is_object())
        format_error(where, "expected an object");
    for (const auto& item : obj.items()) {
        bool known = false;
        for (const char* key : allowed)
            known = known || item.key() == key;
        if (!known)
            format_error(where.empty() ? item.key() : where + "." + item.key(), "unknown field '" + item.key() + "'");
    }
    for (const char* key : allowed)
        if (!obj.contains(key))
            format_error(where.empty() ? key : where + "." + key, "missing required field");
}

inline double read_real(const json& j, const std::string& where) {
    if (!j.is_number())
        format_error(where, "expected a number");
    return j.get<double>();
}

inline std::size_t read_index(const json& j, const std::string& where) {
    if (!j.is_number_integer() || j.get<long long>() < 0)
        format_error(where, "expected a non-negative integer");
    return j.get<std::size_t>();
}

inline std::vector<Transition> read_transitions(const json& j, const std::string& where) {
    if (!j.is_array())
        format_error(where, "expected a list of [state, prob] pairs");
    std::vector<Transition> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string at = where + "[" + std::to_string(i) + "]";
        if (!j[i].is_array() || j[i].size() != 2)
            format_error(at, "expected a [state, prob] pair");
        out.push_back({read_index(j[i][0], at + "[0]"), read_real(j[i][1], at + "[1]")});
    }
    return out;
}

inline std::pair<std::size_t, std::size_t> line_and_column(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

}  // namespace detail

inline nlohmann::json mdp_to_json(const TabularMDP& mdp) {
    using nlohmann::json;
    json states = json::array();
    for (const auto& row : mdp.actions) {
        json acts = json::array();
        for (const auto& a : row)
            acts.push_back(json{{"reward", a.reward}, {"next", detail::transitions_to_json(a.next)}});
        states.push_back(std::move(acts));
    }
    return json{{"num_states", mdp.num_states},
                {"gamma", mdp.gamma},
                {"terminals", mdp.terminals},
                {"initial", detail::transitions_to_json(mdp.initial)},
                {"states", std::move(states)}};
}

/// Builds and validates an MDP from its JSON document.
inline TabularMDP mdp_from_json(const nlohmann::json& doc) {
    using detail::format_error;
    detail::check_keys(doc, {"num_states", "gamma", "terminals", "initial", "states"}, "");

    TabularMDP mdp;
    mdp.num_states = detail::read_index(doc["num_states"], "num_states");
    mdp.gamma = detail::read_real(doc["gamma"], "gamma");
    if (!(mdp.gamma > 0.0 && mdp.gamma <= 1.0))
        format_error("gamma", "gamma must lie in (0, 1], got " + doc["gamma"].dump());

    const auto& terminals = doc["terminals"];
    if (!terminals.is_array())
        format_error("terminals", "expected an integer list");
    for (std::size_t i = 0; i < terminals.size(); ++i)
        mdp.terminals.push_back(detail::read_index(terminals[i], "terminals[" + std::to_string(i) + "]"));
    std::sort(mdp.terminals.begin(), mdp.terminals.end());

    mdp.initial = detail::read_transitions(doc["initial"], "initial");

    const auto& states = doc["states"];
    if (!states.is_array())
        format_error("states", "expected an array of per-state action arrays");
    for (std::size_t s = 0; s < states.size(); ++s) {
        const std::string at = "states[" + std::to_string(s) + "]";
        if (!states[s].is_array())
            format_error(at, "expected an array of actions");
        std::vector<Action> row;
        for (std::size_t a = 0; a < states[s].size(); ++a) {
            const std::string where = at + "[" + std::to_string(a) + "]";
            const auto& act = states[s][a];
            detail::check_keys(act, {"reward", "next"}, where);
            row.push_back({detail::read_real(act["reward"], where + ".reward"),
                           detail::read_transitions(act["next"], where + ".next")});
        }
        mdp.actions.push_back(std::move(row));
    }

    const auto report = validate(mdp);
    if (!report.ok())
        throw MdpFormatError("invalid MDP: " + report.summary());
    return mdp;
}

inline TabularMDP parse_mdp(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        const auto [line, col] = detail::line_and_column(text, e.byte);
        throw MdpFormatError("parse error at line " + std::to_string(line) + ", column " + std::to_string(col) +
                             ": " + e.what());
    }
    return mdp_from_json(doc);
}

inline std::string dump_mdp(const TabularMDP& mdp) { return mdp_to_json(mdp).dump(2) + "\n"; }

inline TabularMDP load_mdp(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw MdpFormatError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_mdp(buf.str());
}

inline void save_mdp(const TabularMDP& mdp, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    out << dump_mdp(mdp);
}

}  // namespace decoupled
