#pragma once

// Instructor-facing views over a built model: threshold filtering, search,
// per-date and per-student views, details on demand and period comparison.

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "csm/automaton.hpp"
#include "csm/layout.hpp"
#include "csm/stats.hpp"

namespace csm {

struct FilterSpec {
  double min_node_freq = 0;  // percent
  double min_edge_freq = 0;

  // Throws unless both thresholds lie in [0, 100].
  void validate() const;
};

// Drops states and edges below the thresholds and edges left dangling. The
// initial state always survives.
Automaton filter_graph(const Automaton& automaton, const FilterSpec& filter);
// Same rule on a precomputed drawing; positions are left untouched.
LayoutGraph filter_layout(const LayoutGraph& layout, const FilterSpec& filter);

// Logs whose started_at lies in [from, to].
std::vector<StudentLog> logs_in_range(const std::vector<StudentLog>& logs, Timestamp from, Timestamp to);
// Throws invalid_argument for an inverted range and empty_input ("no data in
// range") when no log starts inside it.
Automaton date_view(const std::vector<StudentLog>& logs, Timestamp from, Timestamp to,
                    const AssignmentConfig& config);

struct TraceStep {
  StateNode state;
  std::optional<EdgeRec> via;  // edge entering the state; empty for the start
  std::size_t events = 0;      // log events folded into this step
};

// One student's single-log automaton, with super-states grouped.
Automaton student_automaton(const std::vector<StudentLog>& logs, const std::string& student_id,
                            const AssignmentConfig& config);
// The student's path through that automaton. Consecutive visits to one
// super-state form a single step.
std::vector<TraceStep> student_trace(const std::vector<StudentLog>& logs, const std::string& student_id,
                                     const AssignmentConfig& config);

// Case-insensitive label prefix search, optionally restricted to a zone, most
// frequent first.
std::vector<StateId> search_state(const Automaton& automaton, const std::string& query,
                                  std::optional<Zone> zone = std::nullopt);

// Details-on-demand record for a state key or an edge key.
nlohmann::json details_of(const Automaton& automaton, const std::string& key);

struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  Rational() = default;
  Rational(std::int64_t n, std::int64_t d);  // normalised, den > 0
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  std::string str() const;

  friend Rational operator-(const Rational& a, const Rational& b);
  friend Rational operator-(const Rational& a);
  friend bool operator==(const Rational& a, const Rational& b) = default;
  friend std::strong_ordering operator<=>(const Rational& a, const Rational& b);
};

// Key of an error in the comparison: the validated action plus the blamed
// action ("f1t20_f1t16"), or the error kind when nothing is blamed. Simple
// and complex dependence failures on the same pair count as one error.
struct ErrorKey {
  std::string action;
  std::string error;

  std::string label() const { return action + "_" + error; }
  auto operator<=>(const ErrorKey&) const = default;
};

struct ComparisonRow {
  ErrorKey key;
  std::optional<std::string> change_id;
  std::size_t count_a = 0;
  std::size_t count_b = 0;
  Rational freq_a;  // share of the period's students, in [0, 1]
  Rational freq_b;
  Rational difference;  // freq_a - freq_b
  bool suppressed = false;  // both frequencies below the display threshold
};

struct PeriodComparison {
  std::size_t n_a = 0;
  std::size_t n_b = 0;
  std::vector<ComparisonRow> rows;
  std::optional<TTestResult> t_test;  // differences of changed vs unchanged errors
  std::optional<UTestResult> u_test;  // grades of period a vs period b
  std::vector<std::string> notes;     // why a statistic is missing
};

struct CompareOptions {
  double suppress_below = 0.30;  // both frequencies under this share
};

// Change map keys are either "action_error" labels or bare blamed codes.
using ChangeMap = std::map<std::string, std::string>;
ChangeMap change_map_from_json(const nlohmann::json& doc);

// Per-error share of students in each period. Statistics use every row,
// suppressed or not.
PeriodComparison compare_periods(const std::vector<StudentLog>& logs_a, const std::vector<StudentLog>& logs_b,
                                 const AssignmentConfig& config, const ChangeMap& changes,
                                 const CompareOptions& options = {});

nlohmann::json trace_to_json(const std::vector<TraceStep>& trace, std::size_t n_students);
nlohmann::json comparison_to_json(const PeriodComparison& comparison);

}  // namespace csm
