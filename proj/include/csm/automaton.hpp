#pragma once

// The extended automaton: zoned states merged across students, with the
// exact set of students behind every state and transition.

#include <compare>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "csm/domain.hpp"

namespace csm {

// Merge key of a state. Two student paths share a state iff every component
// matches.
struct StateId {
  Zone zone = Zone::kCorrectFlow;
  std::string action;                  // validated / performed action ("" for the initial state)
  std::optional<std::string> blamed;   // skipped / incompatible / world-error subject
  ErrorKind error = ErrorKind::kNone;
  int anchor = -1;                     // flow index of the nearest preceding correct-flow action
  bool grouped = false;                // super-state

  auto operator<=>(const StateId&) const = default;
  bool operator==(const StateId&) const = default;

  // Canonical text form, e.g. "relevant:f1t20:f1t16:SIMPLE_DEPENDENCE:12".
  std::string key() const;
  static StateId parse(const std::string& key);
};

enum class StateKind {
  kCorrect,
  kSimpleDependence,
  kComplexDependence,
  kIncompatibility,
  kTime,
  kWorld,
  kAlreadyPerformed,
  kNotFound,
  kSuperAlready,
  kSuperNotFound,
};

std::string_view to_string(StateKind kind);
StateKind parse_state_kind(std::string_view text);
inline constexpr StateKind kAllStateKinds[] = {
    StateKind::kCorrect,          StateKind::kSimpleDependence, StateKind::kComplexDependence,
    StateKind::kIncompatibility,  StateKind::kTime,             StateKind::kWorld,
    StateKind::kAlreadyPerformed, StateKind::kNotFound,         StateKind::kSuperAlready,
    StateKind::kSuperNotFound};

struct StateNode {
  StateId id;
  StateKind kind = StateKind::kCorrect;
  std::set<std::string> students;
  std::string label;
  std::string description;
  std::optional<std::string> tutoring_message;
  std::size_t group_size = 1;  // number of states folded into a super-state
  std::optional<int> flow_index;  // position of the action on the correct flow

  bool operator==(const StateNode&) const = default;
};

struct EdgeRec {
  StateId from;
  StateId to;
  EventKind event_kind = EventKind::kDo;
  std::string event_action;  // event subject: "fail 4" has subject "4"
  std::set<std::string> students;

  std::string label() const;
  std::string key() const;  // "<from key>><to key>><label>"
  bool operator==(const EdgeRec&) const = default;
};

struct Automaton {
  std::optional<int> cluster_id;
  std::size_t n_students = 0;
  std::vector<StateNode> states;  // canonical order: zone, anchor, label, key
  std::vector<EdgeRec> edges;     // canonical order: from, to, label
  StateId initial;

  const StateNode* find_state(const StateId& id) const;
  const StateNode* find_state(const std::string& key) const;
  const EdgeRec* find_edge(const std::string& key) const;
  // Restores the canonical order after edits.
  void normalize();

  bool operator==(const Automaton&) const = default;
};

// Percent of a cluster's students; exact up to double rounding.
double frequency_percent(std::size_t count, std::size_t n);
double frequency_of(const StateNode& node, std::size_t n);
double frequency_of(const EdgeRec& edge, std::size_t n);

struct PathStep {
  StateId state;
  StateKind kind = StateKind::kCorrect;
  EventKind event_kind = EventKind::kDo;
  std::string event_action;
};

// The state sequence a single log walks through (the initial state is
// implicit). This is where the zone rules live.
std::vector<PathStep> trace_path(const StudentLog& log, const AssignmentConfig& config);
std::vector<Zone> event_zones(const StudentLog& log, const AssignmentConfig& config);

StateId initial_state_id();

Automaton build_automaton(const std::vector<StudentLog>& logs, const AssignmentConfig& config,
                          std::optional<int> cluster_id = std::nullopt);

// Collapses every maximal chain (two or more states joined by transitions)
// of ALREADY_PERFORMED states, and likewise NOT_FOUND states, into one
// super-state. `folded`, when given, receives member id -> super-state id.
Automaton group_super_states(const Automaton& automaton, std::map<StateId, StateId>* folded = nullptr);

nlohmann::json automaton_to_json(const Automaton& automaton);
Automaton automaton_from_json(const nlohmann::json& doc);

}  // namespace csm
