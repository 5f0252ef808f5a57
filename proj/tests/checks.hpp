#pragma once

// Independent checkers shared by the unit tests and the acceptance binary.
// Each returns an empty string when the property holds, otherwise the first
// violation found.

#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "csm/automaton.hpp"
#include "csm/layout.hpp"
#include "support.hpp"

namespace csm::check {

inline bool fail_matters(const StudentEvent& e, const AssignmentConfig& c) {
  if (e.error_kind == ErrorKind::kWorld) {
    const ActionSpec* s = c.find(e.action_code);
    return s && s->world_errors_relevant;
  }
  return is_result_affecting(e.error_kind);
}

// State key and edge label per event, derived without trace_path: first mark
// which DO events are followed by a result-affecting FAIL of their own, then
// walk forward.
inline std::vector<std::pair<std::string, std::string>> oracle_path(const StudentLog& log,
                                                                    const AssignmentConfig& c) {
  const auto& ev = log.events;
  std::vector<bool> do_blames(ev.size(), false);
  bool pending = false;
  for (std::size_t k = ev.size(); k-- > 0;) {
    const auto& e = ev[k];
    if (e.kind == EventKind::kFail) {
      pending = pending || fail_matters(e, c);
      // A FAIL block only attaches to a DO of the same action.
      if (k > 0 && ev[k - 1].action_code != e.action_code) pending = false;
      continue;
    }
    if (e.kind == EventKind::kDo && e.error_kind == ErrorKind::kNone) do_blames[k] = pending;
    pending = false;
  }

  std::vector<std::pair<std::string, std::string>> out;
  bool bad = false;
  int anchor = -1;
  for (std::size_t k = 0; k < ev.size(); ++k) {
    const auto& e = ev[k];
    StateId id;
    id.action = e.action_code;
    id.anchor = anchor;
    id.error = e.error_kind;
    std::string subject = e.action_code;
    if (e.kind == EventKind::kFail) {
      id.blamed = e.blamed_action;
      id.zone = fail_matters(e, c) ? Zone::kRelevantErrors : Zone::kIrrelevantErrors;
      bad = bad || fail_matters(e, c);
      subject = *e.blamed_action;
    } else if (e.error_kind != ErrorKind::kNone || e.kind == EventKind::kTry) {
      id.zone = Zone::kIrrelevantErrors;
      if (e.kind == EventKind::kTry && e.error_kind == ErrorKind::kNone) id.blamed = e.blamed_action;
    } else {
      id.zone = bad || do_blames[k] ? Zone::kRelevantErrors : Zone::kCorrectFlow;
    }
    out.emplace_back(id.key(), std::string(to_string(e.kind)) + " " + subject);
    if (e.kind == EventKind::kDo && e.error_kind == ErrorKind::kNone) {
      // The DO's own FAIL block keeps the old anchor; taint applies after it.
      std::size_t j = k + 1;
      while (j < ev.size() && ev[j].kind == EventKind::kFail && ev[j].action_code == e.action_code) {
        StateId f;
        f.action = ev[j].action_code;
        f.blamed = ev[j].blamed_action;
        f.error = ev[j].error_kind;
        f.anchor = anchor;
        f.zone = fail_matters(ev[j], c) ? Zone::kRelevantErrors : Zone::kIrrelevantErrors;
        out.emplace_back(f.key(), "fail " + *ev[j].blamed_action);
        ++j;
      }
      bad = bad || do_blames[k];
      if (auto pos = c.flow_index(e.action_code)) anchor = static_cast<int>(*pos);
      k = j - 1;
    }
  }
  return out;
}

using EdgeTuple = std::tuple<std::string, std::string, std::string>;

struct Counts {
  std::map<std::string, std::set<std::string>> states;
  std::map<EdgeTuple, std::set<std::string>> edges;
};

inline Counts oracle_counts(const std::vector<StudentLog>& logs, const AssignmentConfig& c) {
  Counts out;
  const std::string start = initial_state_id().key();
  for (const auto& log : logs) {
    out.states[start].insert(log.student_id);
    std::string prev = start;
    for (const auto& [key, label] : oracle_path(log, c)) {
      out.states[key].insert(log.student_id);
      out.edges[{prev, key, label}].insert(log.student_id);
      prev = key;
    }
  }
  return out;
}

// Exact student sets per state and edge, 1e-9 on percentages.
inline std::string frequency_mismatch(const Automaton& a, const std::vector<StudentLog>& logs,
                                      const AssignmentConfig& c) {
  const Counts want = oracle_counts(logs, c);
  std::ostringstream why;
  if (a.states.size() != want.states.size() || a.edges.size() != want.edges.size()) {
    why << "sizes " << a.states.size() << "/" << a.edges.size() << " vs oracle " << want.states.size() << "/"
        << want.edges.size();
    return why.str();
  }
  const double n = static_cast<double>(logs.size());
  for (const auto& s : a.states) {
    auto it = want.states.find(s.id.key());
    if (it == want.states.end()) return "state not in oracle: " + s.id.key();
    if (s.students != it->second) return "student set differs at " + s.id.key();
    const double pct = 100.0 * static_cast<double>(it->second.size()) / n;
    if (std::abs(frequency_of(s, a.n_students) - pct) > 1e-9) return "percentage differs at " + s.id.key();
  }
  for (const auto& e : a.edges) {
    auto it = want.edges.find({e.from.key(), e.to.key(), e.label()});
    if (it == want.edges.end()) return "edge not in oracle: " + e.key();
    if (e.students != it->second) return "student set differs at " + e.key();
    const double pct = 100.0 * static_cast<double>(it->second.size()) / n;
    if (std::abs(frequency_of(e, a.n_students) - pct) > 1e-9) return "percentage differs at " + e.key();
  }
  return {};
}

// Small random assignment with dependencies, an optional blocked action and
// noise heavy enough to produce long runs of repeats and unknown actions.
struct RandomCase {
  AssignmentConfig config;
  std::vector<StudentLog> logs;
};

inline RandomCase random_case(std::mt19937_64& rng) {
  RandomCase rc;
  auto& c = rc.config;
  c.assignment_id = "rand";
  c.phases = {"p1", "p2"};
  const int n_flow = std::uniform_int_distribution<int>(3, 7)(rng);
  for (int i = 0; i < n_flow; ++i) {
    ActionSpec a;
    a.code = "a" + std::to_string(i);
    a.phase = i < n_flow / 2 ? "p1" : "p2";
    if (i >= 2 && rng() % 3 == 0) a.dependencies = {"a" + std::to_string(rng() % static_cast<unsigned>(i))};
    c.correct_flow.push_back(a.code);
    c.actions.push_back(a);
  }
  for (int i = 0; i < 2; ++i) c.actions.push_back({"x" + std::to_string(i), i ? "p2" : "p1"});
  if (rng() % 2) c.blocked_actions = {"a" + std::to_string(n_flow - 1)};
  c.reindex();

  std::vector<std::string> pool = c.correct_flow;
  pool.insert(pool.end(), {"x0", "x1", "zz", "yy"});
  const int students = std::uniform_int_distribution<int>(1, 6)(rng);
  for (int s = 0; s < students; ++s) {
    std::vector<std::string> codes;
    for (const auto& code : c.correct_flow) {
      while (rng() % 3 == 0) codes.push_back(pool[rng() % pool.size()]);
      if (rng() % 5) codes.push_back(code);
      if (rng() % 4 == 0) {
        const int run = std::uniform_int_distribution<int>(1, 4)(rng);
        for (int r = 0; r < run; ++r) {
          codes.push_back(codes.empty() || rng() % 2 ? (rng() % 2 ? "zz" : "yy") : codes.back());
        }
      }
    }
    rc.logs.push_back(test::replayed("r" + std::to_string(s), codes, c));
  }
  return rc;
}

inline bool already_class(StateKind k) { return k == StateKind::kAlreadyPerformed || k == StateKind::kSuperAlready; }
inline bool not_found_class(StateKind k) { return k == StateKind::kNotFound || k == StateKind::kSuperNotFound; }

// Idempotence, no remaining run of two same-class error states, and student
// mass preserved per state and per surviving edge. `groups` counts the
// super-states formed.
inline std::string grouping_violation(const Automaton& a, std::size_t* groups = nullptr) {
  std::map<StateId, StateId> folded;
  const Automaton g = group_super_states(a, &folded);
  if (!(group_super_states(g) == g)) return "grouping is not idempotent";

  for (const auto& e : g.edges) {
    if (e.from == e.to) continue;
    const StateKind kf = g.find_state(e.from)->kind;
    const StateKind kt = g.find_state(e.to)->kind;
    if ((already_class(kf) && already_class(kt)) || (not_found_class(kf) && not_found_class(kt))) {
      return "uncollapsed run at " + e.key();
    }
  }

  auto target = [&](const StateId& id) {
    auto it = folded.find(id);
    return it == folded.end() ? id : it->second;
  };
  std::map<StateId, std::set<std::string>> mass;
  std::map<StateId, std::size_t> members;
  for (const auto& s : a.states) {
    mass[target(s.id)].insert(s.students.begin(), s.students.end());
    ++members[target(s.id)];
  }
  if (mass.size() != g.states.size()) return "state count does not match the folding";
  for (const auto& s : g.states) {
    if (mass.at(s.id) != s.students) return "student mass changed at " + s.id.key();
    if (members.at(s.id) != s.group_size) return "group size wrong at " + s.id.key();
    if (s.group_size >= 2) {
      if (!s.id.grouped) return "multi-member state not marked grouped: " + s.id.key();
      if (groups) ++*groups;
    }
  }

  std::map<std::tuple<StateId, StateId, std::string>, std::set<std::string>> edge_mass;
  for (const auto& e : a.edges) {
    const StateId f = target(e.from), t = target(e.to);
    if (f == t && f.grouped) continue;  // internal to a super-state
    edge_mass[{f, t, e.label()}].insert(e.students.begin(), e.students.end());
  }
  if (edge_mass.size() != g.edges.size()) return "edge count does not match the folding";
  for (const auto& e : g.edges) {
    auto it = edge_mass.find({e.from, e.to, e.label()});
    if (it == edge_mass.end() || it->second != e.students) return "edge mass changed at " + e.key();
  }
  return {};
}

inline bool overlaps(const LayoutNode& a, const LayoutNode& b) {
  return a.x < b.x + b.width && b.x < a.x + a.width && a.y < b.y + b.height && b.y < a.y + a.height;
}

// Band order, every node inside its band, no two node rectangles
// overlapping, and within a relevant-band column every dependence state of
// an action above every incompatibility state of that action. `pairs`
// counts the stack pairs compared.
inline std::string layout_violation(const LayoutGraph& g, std::size_t* pairs = nullptr) {
  if (g.bands[0].zone != Zone::kIrrelevantErrors || g.bands[1].zone != Zone::kCorrectFlow ||
      g.bands[2].zone != Zone::kRelevantErrors) {
    return "bands out of order";
  }
  if (g.bands[0].bottom > g.bands[1].top || g.bands[1].bottom > g.bands[2].top) return "bands overlap";
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const auto& n = g.nodes[i];
    const Band& b = g.band(n.state.zone);
    if (n.y < b.top || n.y + n.height > b.bottom || n.x < 0 || n.x + n.width > g.width) {
      return "node outside its band: " + n.key;
    }
    for (std::size_t j = i + 1; j < g.nodes.size(); ++j) {
      if (overlaps(n, g.nodes[j])) return "overlap: " + n.key + " and " + g.nodes[j].key;
    }
  }
  for (const auto& d : g.nodes) {
    if (d.state.zone != Zone::kRelevantErrors) continue;
    if (d.kind != StateKind::kSimpleDependence && d.kind != StateKind::kComplexDependence) continue;
    for (const auto& i : g.nodes) {
      if (i.state.zone != Zone::kRelevantErrors || i.kind != StateKind::kIncompatibility) continue;
      if (i.column != d.column || i.state.action != d.state.action) continue;
      if (pairs) ++*pairs;
      if (d.y + d.height > i.y) return "incompatibility above dependence: " + i.key;
    }
  }
  return {};
}

}  // namespace csm::check
