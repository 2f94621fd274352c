#pragma once

#include <algorithm>
#include <array>
#include <queue>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cii/common.hpp"

namespace cii {

struct StateDef {
    int id = 0;  // 1-based label
    std::string name;
    StateKind kind = StateKind::transient;
    std::string description;
};

using Transition = std::pair<int, int>;

// A multiple state model: the finite state space plus the set of allowed
// direct transitions. Self-loops ("stay" events) are implicit and never
// members of the transition set. Immutable once built; safe to share.
struct MultiStateModel {
    std::string name;
    std::vector<StateDef> states;        // ordered by id, 1..N
    std::vector<Transition> transitions;  // (i, j) with i != j
    int initial_state = 1;

    int size() const { return static_cast<int>(states.size()); }

    const StateDef& state(int id) const {
        if (id < 1 || id > size()) throw std::out_of_range("state id out of range: " + std::to_string(id));
        return states[static_cast<std::size_t>(id - 1)];
    }

    bool has_transition(int i, int j) const {
        return std::find(transitions.begin(), transitions.end(), Transition{i, j}) != transitions.end();
    }

    std::vector<int> successors(int i) const {
        std::vector<int> out;
        for (const auto& [a, b] : transitions)
            if (a == i) out.push_back(b);
        return out;
    }
};

// The twelve transitions of the 8-state lung-cancer CII model, in the fixed
// order used for increment-decrement table columns.
inline constexpr std::array<Transition, 12> cii_transitions = {{
    {1, 2}, {1, 3}, {1, 7}, {2, 3}, {2, 7},
    {3, 4}, {3, 8}, {4, 5}, {4, 8}, {5, 6}, {5, 8}, {6, 8},
}};

// The 8-state lung-cancer critical-illness model. States 3..6 are reflex
// (occupied for exactly one year); 7 and 8 are absorbing and split deaths
// by the health situation just before death. State 6 can only move to 8.
inline MultiStateModel build_cii_model() {
    MultiStateModel m;
    m.name = "lung-cancer-cii-8";
    m.states = {
        {1, "healthy", StateKind::transient, "alive, no malignant lung tumour"},
        {2, "cancer-no-metastases", StateKind::transient, "lung cancer, distant metastases not found"},
        {3, "metastatic-stage-1", StateKind::reflex, "lung cancer with distant metastases, e_s < 4"},
        {4, "metastatic-stage-2", StateKind::reflex, "lung cancer with distant metastases, e_s < 3"},
        {5, "metastatic-stage-3", StateKind::reflex, "lung cancer with distant metastases, e_s < 2"},
        {6, "metastatic-stage-4", StateKind::reflex, "lung cancer with distant metastases, e_s < 1"},
        {7, "death-nonmetastatic", StateKind::absorbing, "died while healthy or without distant metastases"},
        {8, "death-metastatic", StateKind::absorbing, "died with distant metastases"},
    };
    m.transitions.assign(cii_transitions.begin(), cii_transitions.end());
    return m;
}

// Classical 4-state dread-disease model {a, i, d(D), d(O)}. With full
// acceleration (lambda = 1) the cover ceases at diagnosis, so the ill state
// becomes absorbing and its death transitions disappear.
inline MultiStateModel build_classical_model(double lambda) {
    if (!(lambda >= 0.0 && lambda <= 1.0))
        throw std::invalid_argument("acceleration parameter must lie in [0, 1]");
    MultiStateModel m;
    m.name = "classical-dd-4";
    const bool stand_alone = lambda == 1.0;
    m.states = {
        {1, "a", StateKind::transient, "active (healthy)"},
        {2, "i", stand_alone ? StateKind::absorbing : StateKind::transient, "ill with the dread disease"},
        {3, "d(D)", StateKind::absorbing, "dead, due to the dread disease"},
        {4, "d(O)", StateKind::absorbing, "dead, other causes"},
    };
    m.transitions = {{1, 2}, {1, 3}, {1, 4}};
    if (!stand_alone) {
        m.transitions.push_back({2, 3});
        m.transitions.push_back({2, 4});
    }
    return m;
}

// Checks every structural invariant; returns one message per violation,
// empty when the model is well formed.
inline std::vector<std::string> validate(const MultiStateModel& m) {
    std::vector<std::string> violations;
    const int n = m.size();

    if (n == 0) {
        violations.push_back("model has no states");
        return violations;
    }
    for (int i = 0; i < n; ++i) {
        if (m.states[static_cast<std::size_t>(i)].id != i + 1)
            violations.push_back("state ids must be 1..N in order; position " + std::to_string(i + 1) +
                                 " has id " + std::to_string(m.states[static_cast<std::size_t>(i)].id));
    }
    if (m.initial_state < 1 || m.initial_state > n)
        violations.push_back("initial state " + std::to_string(m.initial_state) + " is not a state");

    for (const auto& [i, j] : m.transitions) {
        if (i < 1 || i > n || j < 1 || j > n)
            violations.push_back("transition (" + std::to_string(i) + "," + std::to_string(j) +
                                 ") references a missing state");
        else if (i == j)
            violations.push_back("transition (" + std::to_string(i) + "," + std::to_string(j) +
                                 ") is a self-loop; stays are implicit");
    }
    for (std::size_t a = 0; a < m.transitions.size(); ++a)
        for (std::size_t b = a + 1; b < m.transitions.size(); ++b)
            if (m.transitions[a] == m.transitions[b])
                violations.push_back("duplicate transition (" + std::to_string(m.transitions[a].first) + "," +
                                     std::to_string(m.transitions[a].second) + ")");

    bool any_absorbing = false;
    for (const auto& s : m.states) {
        const auto out = m.successors(s.id);
        switch (s.kind) {
            case StateKind::absorbing:
                any_absorbing = true;
                if (!out.empty())
                    violations.push_back("absorbing state " + std::to_string(s.id) +
                                         " has outgoing transitions");
                break;
            case StateKind::reflex:
                // A reflex state is left after exactly one period, so a way out
                // must exist.
                if (out.empty())
                    violations.push_back("reflex state " + std::to_string(s.id) +
                                         " has no outgoing transition");
                break;
            case StateKind::transient:
                if (out.empty())
                    violations.push_back("transient state " + std::to_string(s.id) +
                                         " has no outgoing transition (should be absorbing)");
                break;
        }
    }
    if (!any_absorbing) violations.push_back("model has no absorbing state");

    // Reachability from the initial state.
    if (m.initial_state >= 1 && m.initial_state <= n) {
        std::vector<bool> seen(static_cast<std::size_t>(n) + 1, false);
        std::queue<int> frontier;
        frontier.push(m.initial_state);
        seen[static_cast<std::size_t>(m.initial_state)] = true;
        while (!frontier.empty()) {
            int cur = frontier.front();
            frontier.pop();
            for (int nxt : m.successors(cur))
                if (nxt >= 1 && nxt <= n && !seen[static_cast<std::size_t>(nxt)]) {
                    seen[static_cast<std::size_t>(nxt)] = true;
                    frontier.push(nxt);
                }
        }
        for (const auto& s : m.states)
            if (!seen[static_cast<std::size_t>(s.id)])
                violations.push_back("state " + std::to_string(s.id) +
                                     " is unreachable from the initial state");
    }
    return violations;
}

inline nlohmann::json to_json(const MultiStateModel& m) {
    nlohmann::json states = nlohmann::json::array();
    for (const auto& s : m.states)
        states.push_back({{"id", s.id},
                          {"name", s.name},
                          {"kind", to_string(s.kind)},
                          {"description", s.description}});
    nlohmann::json transitions = nlohmann::json::array();
    for (const auto& [i, j] : m.transitions) transitions.push_back({i, j});
    return {{"name", m.name},
            {"initial_state", m.initial_state},
            {"states", states},
            {"transitions", transitions}};
}

}  // namespace cii
