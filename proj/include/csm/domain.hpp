#pragma once

// Assignment configuration and the event / zone / error vocabulary shared by
// every other part of the collective student model.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace csm {

enum class Errc {
  invalid_argument,
  not_found,
  io,
  parse,
  empty_input,
};

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

std::string_view to_string(Errc code);

using Timestamp = std::chrono::sys_seconds;

// ISO-8601 "YYYY-MM-DDThh:mm:ss" with optional fractional seconds and an
// optional "Z" / "+hh:mm" suffix. Throws Error(parse) on malformed input.
Timestamp parse_timestamp(std::string_view text);
// Always UTC with a trailing 'Z'.
std::string format_timestamp(Timestamp ts);

enum class EventKind { kDo, kTry, kFail };

enum class ErrorKind {
  kSimpleDependence,
  kComplexDependence,
  kIncompatibility,
  kTime,
  kWorld,
  kAlreadyPerformed,
  kNotFound,
  kNone,
};

enum class Zone { kCorrectFlow, kIrrelevantErrors, kRelevantErrors };

// Wire names: "do"/"try"/"fail", "SIMPLE_DEPENDENCE".., "correct"/"irrelevant"/"relevant".
std::string_view to_string(EventKind kind);
std::string_view to_string(ErrorKind kind);
std::string_view to_string(Zone zone);
EventKind parse_event_kind(std::string_view text);
ErrorKind parse_error_kind(std::string_view text);
// Accepts the short wire names and the enumerator spellings (CORRECT_FLOW, ...).
Zone parse_zone(std::string_view text);

inline constexpr EventKind kAllEventKinds[] = {EventKind::kDo, EventKind::kTry, EventKind::kFail};
inline constexpr ErrorKind kAllErrorKinds[] = {
    ErrorKind::kSimpleDependence, ErrorKind::kComplexDependence, ErrorKind::kIncompatibility,
    ErrorKind::kTime,             ErrorKind::kWorld,             ErrorKind::kAlreadyPerformed,
    ErrorKind::kNotFound,         ErrorKind::kNone};
inline constexpr Zone kAllZones[] = {Zone::kCorrectFlow, Zone::kIrrelevantErrors,
                                     Zone::kRelevantErrors};

bool is_dependence(ErrorKind kind);
// Errors that influence the final result and taint the rest of the log.
bool is_result_affecting(ErrorKind kind);

struct TimeConstraint {
  std::string other;
  std::optional<double> min_seconds;
  std::optional<double> max_seconds;

  bool operator==(const TimeConstraint&) const = default;
};

struct ActionSpec {
  std::string code;
  std::string phase;
  std::string description;
  std::vector<std::string> dependencies;
  std::vector<std::string> incompatibilities;
  std::vector<TimeConstraint> time_constraints;
  double weight = 1.0;
  std::optional<std::string> tutoring_message;
  // World errors on this action count as result-affecting.
  bool world_errors_relevant = false;

  bool operator==(const ActionSpec&) const = default;
};

class AssignmentConfig {
 public:
  std::string assignment_id;
  std::vector<std::string> phases;
  std::vector<std::string> correct_flow;
  std::vector<std::string> blocked_actions;
  std::vector<ActionSpec> actions;

  // Lookup helpers. The index is rebuilt by reindex(); loaders call it.
  void reindex();
  const ActionSpec* find(std::string_view code) const;
  // Position in correct_flow, if the code is on it.
  std::optional<std::size_t> flow_index(std::string_view code) const;
  std::optional<std::size_t> phase_index(std::string_view phase) const;
  bool is_blocked(std::string_view code) const;

  // Compares the declared fields; the lookup indexes are derived.
  friend bool operator==(const AssignmentConfig& a, const AssignmentConfig& b) {
    return a.assignment_id == b.assignment_id && a.phases == b.phases && a.correct_flow == b.correct_flow &&
           a.blocked_actions == b.blocked_actions && a.actions == b.actions;
  }

 private:
  std::map<std::string, std::size_t, std::less<>> by_code_;
  std::map<std::string, std::size_t, std::less<>> flow_pos_;
};

struct Violation {
  std::string code;  // offending action code (or "<config>")
  std::string rule;
  std::string message;

  auto operator<=>(const Violation&) const = default;
};

// Empty iff every configuration invariant holds. Output is sorted, so the
// result does not depend on the order of the action set.
std::vector<Violation> validate_config(const AssignmentConfig& config);

AssignmentConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const AssignmentConfig& config);
AssignmentConfig load_config(const std::filesystem::path& path);

struct StudentEvent {
  std::string student_id;
  Timestamp timestamp{};
  EventKind kind = EventKind::kDo;
  std::string action_code;
  ErrorKind error_kind = ErrorKind::kNone;
  std::optional<std::string> blamed_action;

  bool operator==(const StudentEvent&) const = default;
};

// What the event is about from the tutor's point of view: the blamed action
// for a FAIL ("fail 4"), otherwise the performed action.
const std::string& event_subject(const StudentEvent& event);
std::string event_label(const StudentEvent& event);

struct StudentLog {
  std::string student_id;
  std::vector<StudentEvent> events;
  Timestamp started_at{};
  Timestamp finished_at{};
  std::optional<double> grade;

  bool operator==(const StudentLog&) const = default;
};

}  // namespace csm
