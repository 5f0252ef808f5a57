#pragma once

// Log ingestion and a re-implementation of the intelligent tutor's
// classification of raw student actions into do / try / fail events.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <random>
#include <optional>
#include <string>
#include <vector>

#include "csm/domain.hpp"

namespace csm {

struct RawAction {
  std::string student_id;
  Timestamp timestamp{};
  std::string action_code;
  std::optional<std::string> world_error;

  bool operator==(const RawAction&) const = default;
};

struct ReplayState {
  std::vector<std::string> performed;
  std::map<std::string, Timestamp> performed_at;
  // Index into correct_flow of the next expected action.
  std::size_t flow_cursor = 0;
  // Set once a result-affecting error has been emitted.
  bool tainted = false;

  bool has_performed(std::string_view code) const;
  bool operator==(const ReplayState&) const = default;
};

struct Classification {
  std::vector<StudentEvent> events;
  ReplayState state;
};

// One tutor validation step. Emits a DO followed by its FAILs (dependence,
// then incompatibility, time and world), a single TRY for blocked wrong
// actions, or a single ALREADY_PERFORMED / NOT_FOUND event.
Classification classify_action(const RawAction& raw, ReplayState state, const AssignmentConfig& config);

// Folds classify_action over a time-ordered stream of one student's actions.
StudentLog replay_student(const std::vector<RawAction>& actions, const AssignmentConfig& config);

struct Diagnostic {
  std::string file;
  std::size_t line = 0;
  std::string message;
};

struct Corpus {
  std::vector<StudentLog> logs;
  std::vector<Diagnostic> diagnostics;
};

// Event-record JSON lines. Student order follows first appearance; events
// are stably sorted by timestamp. Malformed lines become diagnostics.
Corpus parse_corpus(std::istream& in, const std::string& source_name = "<stream>");
// A single file or every *.jsonl file of a directory (sorted by name).
Corpus parse_corpus(const std::filesystem::path& source);

struct RawCorpus {
  std::map<std::string, std::vector<RawAction>> students;
  std::vector<std::string> order;  // first-appearance order of student ids
  std::map<std::string, double> grades;
  std::vector<Diagnostic> diagnostics;
};

RawCorpus parse_raw_actions(std::istream& in, const std::string& source_name = "<stream>");

// Reads event-record and raw-action files alike; raw actions are replayed
// against the configuration. Grades on summary lines are kept for both.
Corpus ingest_files(const std::vector<std::filesystem::path>& paths, const AssignmentConfig& config);

void write_corpus(std::ostream& out, const std::vector<StudentLog>& logs);
void write_raw_actions(std::ostream& out, const std::vector<std::vector<RawAction>>& students);

struct GenerationProfile {
  std::size_t count = 1;
  double skip_probability = 0.0;
  double repeat_probability = 0.0;
  std::uint64_t seed = 0;
  // Per-action skip probability overriding skip_probability. An override of
  // zero also exempts the action from force_error.
  std::map<std::string, double> skip_overrides;
  double wrong_action_probability = 0.0;  // off-flow action of the current phase
  // Off-flow actions wrong-action noise draws from; empty means all of them.
  std::vector<std::string> distractors;
  double wrong_phase_probability = 0.0;   // action of another phase (NOT_FOUND)
  double world_error_probability = 0.0;
  double time_violation_probability = 0.0;
  // Performs the next correct-flow action before the current one.
  double swap_probability = 0.0;
  // Mean number of distractors performed before the first and after the last
  // correct-flow action (Poisson).
  double leading_distractors = 0.0;
  double trailing_distractors = 0.0;
  // Guarantees at least one skipped correct-flow action per student, chosen
  // among flow positions [force_error_from, force_error_before) (0: no bound).
  bool force_error = false;
  std::size_t force_error_from = 0;
  std::size_t force_error_before = 0;
  Timestamp start = Timestamp{std::chrono::seconds{1420070400}};  // 2015-01-01
  std::chrono::seconds spacing{std::chrono::hours{24}};
  std::string id_prefix = "s";
};

// One synthetic student's raw action stream starting at `start`.
std::vector<RawAction> generate_student_actions(const AssignmentConfig& config,
                                                const GenerationProfile& profile,
                                                const std::string& student_id, Timestamp start,
                                                std::mt19937_64& rng);

// 10 minus penalties for relevant and irrelevant errors, with +-0.5 noise,
// rounded to one decimal.
double synthetic_grade(const StudentLog& log, std::mt19937_64& rng);

// Deterministic for fixed seeds. Student ids are id_prefix + running number
// (three digits) across all profiles.
std::vector<StudentLog> generate_corpus(const AssignmentConfig& config,
                                        const std::vector<GenerationProfile>& profiles);

}  // namespace csm
