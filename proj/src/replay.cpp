#include "csm/replay.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace csm {

using nlohmann::json;

bool ReplayState::has_performed(std::string_view code) const {
  return std::find(performed.begin(), performed.end(), code) != performed.end();
}

namespace {

// Phase the tutor currently expects: the phase of the next correct-flow action.
std::optional<std::size_t> current_phase(const ReplayState& state, const AssignmentConfig& config) {
  if (config.correct_flow.empty()) return std::nullopt;
  const std::size_t at = std::min(state.flow_cursor, config.correct_flow.size() - 1);
  const ActionSpec* spec = config.find(config.correct_flow[at]);
  if (!spec) return std::nullopt;
  return config.phase_index(spec->phase);
}

// Actions of the current phase are expected; so are correct-flow actions of
// the immediately following phase (moving on leaves the rest of the phase as
// skipped). Anything else is "not found" in the current phase.
bool phase_allows(const ActionSpec& spec, const ReplayState& state, const AssignmentConfig& config) {
  const auto current = current_phase(state, config);
  const auto own = config.phase_index(spec.phase);
  if (!current || !own) return true;
  if (*own == *current) return true;
  return *own == *current + 1 && config.flow_index(spec.code).has_value();
}

}  // namespace

Classification classify_action(const RawAction& raw, ReplayState state, const AssignmentConfig& config) {
  Classification out;
  const bool blocked = config.is_blocked(raw.action_code);
  auto event = [&](EventKind kind, std::string action, ErrorKind error, std::optional<std::string> blamed) {
    return StudentEvent{raw.student_id, raw.timestamp, kind, std::move(action), error, std::move(blamed)};
  };
  auto single = [&](ErrorKind error) {
    out.events.push_back(
        event(blocked ? EventKind::kTry : EventKind::kDo, raw.action_code, error, std::nullopt));
    out.state = std::move(state);
    return std::move(out);
  };

  const ActionSpec* spec = config.find(raw.action_code);
  if (!spec) return single(ErrorKind::kNotFound);
  if (state.has_performed(raw.action_code)) return single(ErrorKind::kAlreadyPerformed);
  if (!phase_allows(*spec, state, config)) return single(ErrorKind::kNotFound);

  const auto flow_pos = config.flow_index(raw.action_code);

  // Unmet dependencies: skipped correct-flow actions first (flow order), then
  // declared dependencies that were never performed.
  std::vector<std::string> unmet;
  if (flow_pos && *flow_pos > state.flow_cursor) {
    for (std::size_t i = state.flow_cursor; i < *flow_pos; ++i) unmet.push_back(config.correct_flow[i]);
  }
  for (const auto& dep : spec->dependencies) {
    if (!state.has_performed(dep) && std::find(unmet.begin(), unmet.end(), dep) == unmet.end()) {
      unmet.push_back(dep);
    }
  }
  std::vector<std::string> incompatible;
  for (const auto& inc : spec->incompatibilities) {
    if (state.has_performed(inc)) incompatible.push_back(inc);
  }
  std::vector<std::string> late_or_early;
  for (const auto& tc : spec->time_constraints) {
    auto it = state.performed_at.find(tc.other);
    if (it == state.performed_at.end()) continue;
    const double elapsed = std::chrono::duration<double>(raw.timestamp - it->second).count();
    if ((tc.min_seconds && elapsed < *tc.min_seconds) || (tc.max_seconds && elapsed > *tc.max_seconds)) {
      late_or_early.push_back(tc.other);
    }
  }

  const bool wrong = !unmet.empty() || !incompatible.empty() || !late_or_early.empty();
  if (blocked && wrong) {
    std::optional<std::string> blamed;
    if (!unmet.empty()) blamed = unmet.front();
    else if (!incompatible.empty()) blamed = incompatible.front();
    else blamed = late_or_early.front();
    out.events.push_back(event(EventKind::kTry, raw.action_code, ErrorKind::kNone, std::move(blamed)));
    out.state = std::move(state);
    return out;
  }

  out.events.push_back(event(EventKind::kDo, raw.action_code, ErrorKind::kNone, std::nullopt));
  const ErrorKind dependence =
      unmet.size() >= 2 ? ErrorKind::kComplexDependence : ErrorKind::kSimpleDependence;
  for (auto& code : unmet) {
    out.events.push_back(event(EventKind::kFail, raw.action_code, dependence, std::move(code)));
  }
  for (auto& code : incompatible) {
    out.events.push_back(event(EventKind::kFail, raw.action_code, ErrorKind::kIncompatibility, std::move(code)));
  }
  for (auto& code : late_or_early) {
    out.events.push_back(event(EventKind::kFail, raw.action_code, ErrorKind::kTime, std::move(code)));
  }
  if (raw.world_error) {
    out.events.push_back(event(EventKind::kFail, raw.action_code, ErrorKind::kWorld, *raw.world_error));
  }

  if (wrong || (raw.world_error && spec->world_errors_relevant)) state.tainted = true;
  state.performed.push_back(raw.action_code);
  state.performed_at[raw.action_code] = raw.timestamp;
  if (flow_pos) state.flow_cursor = std::max(state.flow_cursor, *flow_pos + 1);
  out.state = std::move(state);
  return out;
}

StudentLog replay_student(const std::vector<RawAction>& actions, const AssignmentConfig& config) {
  StudentLog log;
  ReplayState state;
  for (const auto& raw : actions) {
    if (log.student_id.empty()) log.student_id = raw.student_id;
    auto step = classify_action(raw, std::move(state), config);
    state = std::move(step.state);
    for (auto& e : step.events) log.events.push_back(std::move(e));
  }
  if (!actions.empty()) {
    log.started_at = actions.front().timestamp;
    log.finished_at = actions.back().timestamp;
  }
  return log;
}

namespace {

struct LogBuilder {
  StudentLog log;
  std::optional<Timestamp> started_at;
  std::optional<Timestamp> finished_at;
};

std::optional<std::string> optional_string(const json& rec, const char* key) {
  if (!rec.contains(key) || rec.at(key).is_null()) return std::nullopt;
  return rec.at(key).get<std::string>();
}

void finish_logs(std::vector<std::string>& order, std::map<std::string, LogBuilder>& builders,
                 std::vector<StudentLog>& out) {
  for (const auto& id : order) {
    auto& b = builders.at(id);
    auto& events = b.log.events;
    std::stable_sort(events.begin(), events.end(),
                     [](const StudentEvent& a, const StudentEvent& c) { return a.timestamp < c.timestamp; });
    if (!events.empty()) {
      b.log.started_at = events.front().timestamp;
      b.log.finished_at = events.back().timestamp;
    }
    if (b.started_at) b.log.started_at = *b.started_at;
    if (b.finished_at) b.log.finished_at = *b.finished_at;
    out.push_back(std::move(b.log));
  }
}

bool blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

Corpus parse_corpus(std::istream& in, const std::string& source_name) {
  Corpus corpus;
  std::vector<std::string> order;
  std::map<std::string, LogBuilder> builders;
  auto builder_for = [&](const std::string& id) -> LogBuilder& {
    auto [it, inserted] = builders.try_emplace(id);
    if (inserted) {
      order.push_back(id);
      it->second.log.student_id = id;
    }
    return it->second;
  };

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    auto diag = [&](std::string message) {
      corpus.diagnostics.push_back({source_name, line_no, std::move(message)});
    };
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception&) {
      diag("not a JSON record");
      continue;
    }
    try {
      if (!rec.is_object()) {
        diag("record is not an object");
        continue;
      }
      const auto id = rec.at("student_id").get<std::string>();
      if (!rec.contains("kind")) {
        // Per-student summary line.
        if (!rec.contains("grade") && !rec.contains("started_at") && !rec.contains("finished_at")) {
          diag("record has neither an event kind nor summary fields");
          continue;
        }
        auto& b = builder_for(id);
        if (rec.contains("grade") && !rec.at("grade").is_null()) b.log.grade = rec.at("grade").get<double>();
        if (auto s = optional_string(rec, "started_at")) b.started_at = parse_timestamp(*s);
        if (auto s = optional_string(rec, "finished_at")) b.finished_at = parse_timestamp(*s);
        continue;
      }
      StudentEvent ev;
      ev.student_id = id;
      ev.kind = parse_event_kind(rec.at("kind").get<std::string>());
      ev.timestamp = parse_timestamp(rec.at("timestamp").get<std::string>());
      ev.action_code = rec.at("action").get<std::string>();
      if (ev.action_code.empty()) {
        diag("empty action code");
        continue;
      }
      ev.error_kind = parse_error_kind(optional_string(rec, "error_kind").value_or(""));
      ev.blamed_action = optional_string(rec, "blamed");
      if (ev.kind == EventKind::kFail && ev.error_kind == ErrorKind::kNone) {
        diag("fail event without an error kind");
        continue;
      }
      if (ev.kind != EventKind::kFail && ev.error_kind != ErrorKind::kNone &&
          ev.error_kind != ErrorKind::kAlreadyPerformed && ev.error_kind != ErrorKind::kNotFound) {
        diag(std::string(to_string(ev.kind)) + " event cannot carry error kind " +
             std::string(to_string(ev.error_kind)));
        continue;
      }
      builder_for(id).log.events.push_back(std::move(ev));
    } catch (const Error& e) {
      diag(e.what());
    } catch (const json::exception& e) {
      diag(std::string("malformed record: ") + e.what());
    }
  }
  finish_logs(order, builders, corpus.logs);
  return corpus;
}

namespace {

std::vector<std::filesystem::path> expand_sources(const std::filesystem::path& source) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (fs::is_directory(source, ec)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(source)) {
      if (entry.is_regular_file() && entry.path().extension() == ".jsonl") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    return files;
  }
  if (!fs::exists(source, ec)) throw Error(Errc::io, "cannot read '" + source.string() + "'");
  return {source};
}

// Student-wise merge keeping first-appearance order.
void merge_into(Corpus& into, Corpus&& part) {
  for (auto& log : part.logs) {
    auto it = std::find_if(into.logs.begin(), into.logs.end(),
                           [&](const StudentLog& l) { return l.student_id == log.student_id; });
    if (it == into.logs.end()) {
      into.logs.push_back(std::move(log));
      continue;
    }
    it->events.insert(it->events.end(), log.events.begin(), log.events.end());
    std::stable_sort(it->events.begin(), it->events.end(),
                     [](const StudentEvent& a, const StudentEvent& b) { return a.timestamp < b.timestamp; });
    it->started_at = std::min(it->started_at, log.started_at);
    it->finished_at = std::max(it->finished_at, log.finished_at);
    if (log.grade) it->grade = log.grade;
  }
  for (auto& d : part.diagnostics) into.diagnostics.push_back(std::move(d));
}

}  // namespace

Corpus parse_corpus(const std::filesystem::path& source) {
  Corpus corpus;
  for (const auto& file : expand_sources(source)) {
    std::ifstream in(file);
    if (!in) throw Error(Errc::io, "cannot read '" + file.string() + "'");
    merge_into(corpus, parse_corpus(in, file.string()));
  }
  return corpus;
}

RawCorpus parse_raw_actions(std::istream& in, const std::string& source_name) {
  RawCorpus raw;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    auto diag = [&](std::string message) {
      raw.diagnostics.push_back({source_name, line_no, std::move(message)});
    };
    try {
      const json rec = json::parse(line);
      const auto id = rec.at("student_id").get<std::string>();
      if (!rec.contains("action")) {
        if (rec.contains("grade")) {
          raw.grades[id] = rec.at("grade").get<double>();
        } else {
          diag("raw action record without an action");
        }
        continue;
      }
      RawAction action{id, parse_timestamp(rec.at("timestamp").get<std::string>()),
                       rec.at("action").get<std::string>(), optional_string(rec, "world_error")};
      if (action.action_code.empty()) {
        diag("empty action code");
        continue;
      }
      auto [it, inserted] = raw.students.try_emplace(id);
      if (inserted) raw.order.push_back(id);
      it->second.push_back(std::move(action));
    } catch (const Error& e) {
      diag(e.what());
    } catch (const json::exception& e) {
      diag(std::string("malformed record: ") + e.what());
    }
  }
  for (auto& [id, actions] : raw.students) {
    std::stable_sort(actions.begin(), actions.end(),
                     [](const RawAction& a, const RawAction& b) { return a.timestamp < b.timestamp; });
  }
  return raw;
}

namespace {

// A file holds raw actions when its first record carries an action but no
// event kind.
bool looks_like_raw_actions(const std::filesystem::path& file) {
  std::ifstream in(file);
  std::string line;
  while (std::getline(in, line)) {
    if (blank(line)) continue;
    try {
      const json rec = json::parse(line);
      if (rec.contains("kind")) return false;
      if (rec.contains("action")) return true;
    } catch (const json::exception&) {
      return false;
    }
  }
  return false;
}

}  // namespace

Corpus ingest_files(const std::vector<std::filesystem::path>& paths, const AssignmentConfig& config) {
  Corpus corpus;
  for (const auto& source : paths) {
    for (const auto& file : expand_sources(source)) {
      std::ifstream in(file);
      if (!in) throw Error(Errc::io, "cannot read '" + file.string() + "'");
      if (!looks_like_raw_actions(file)) {
        merge_into(corpus, parse_corpus(in, file.string()));
        continue;
      }
      RawCorpus raw = parse_raw_actions(in, file.string());
      Corpus part;
      part.diagnostics = std::move(raw.diagnostics);
      for (const auto& id : raw.order) {
        StudentLog log = replay_student(raw.students.at(id), config);
        if (auto g = raw.grades.find(id); g != raw.grades.end()) log.grade = g->second;
        part.logs.push_back(std::move(log));
      }
      merge_into(corpus, std::move(part));
    }
  }
  return corpus;
}

void write_corpus(std::ostream& out, const std::vector<StudentLog>& logs) {
  for (const auto& log : logs) {
    for (const auto& e : log.events) {
      json rec = {{"student_id", e.student_id},
                  {"timestamp", format_timestamp(e.timestamp)},
                  {"kind", to_string(e.kind)},
                  {"action", e.action_code},
                  {"error_kind", to_string(e.error_kind)}};
      if (e.blamed_action) rec["blamed"] = *e.blamed_action;
      out << rec.dump() << '\n';
    }
    json summary = {{"student_id", log.student_id},
                    {"started_at", format_timestamp(log.started_at)},
                    {"finished_at", format_timestamp(log.finished_at)}};
    if (log.grade) summary["grade"] = *log.grade;
    out << summary.dump() << '\n';
  }
}

void write_raw_actions(std::ostream& out, const std::vector<std::vector<RawAction>>& students) {
  for (const auto& actions : students) {
    for (const auto& a : actions) {
      json rec = {{"student_id", a.student_id},
                  {"timestamp", format_timestamp(a.timestamp)},
                  {"action", a.action_code}};
      if (a.world_error) rec["world_error"] = *a.world_error;
      out << rec.dump() << '\n';
    }
  }
}

namespace {

bool chance(std::mt19937_64& rng, double p) {
  if (p <= 0.0) return false;
  if (p >= 1.0) return true;
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
}

template <class T>
const T& pick(std::mt19937_64& rng, const std::vector<T>& items) {
  return items[std::uniform_int_distribution<std::size_t>(0, items.size() - 1)(rng)];
}

// Seconds between two actions, honouring the action's time constraints
// unless a violation is requested.
std::chrono::seconds step_delay(const ActionSpec& spec, bool violate, std::mt19937_64& rng) {
  double lo = 20.0;
  double hi = 60.0;
  bool has_min = false;
  double max_bound = 0.0;
  bool has_max = false;
  for (const auto& tc : spec.time_constraints) {
    if (tc.min_seconds) {
      lo = std::max(lo, *tc.min_seconds + 1.0);
      has_min = true;
    }
    if (tc.max_seconds) {
      hi = std::min(hi, *tc.max_seconds - 1.0);
      max_bound = has_max ? std::min(max_bound, *tc.max_seconds) : *tc.max_seconds;
      has_max = true;
    }
  }
  if (violate && has_min) return std::chrono::seconds{1};
  if (violate && has_max) return std::chrono::seconds{static_cast<long>(max_bound) + 60};
  if (hi < lo) hi = lo;
  return std::chrono::seconds{
      static_cast<long>(std::llround(std::uniform_real_distribution<double>(lo, hi)(rng)))};
}

}  // namespace

std::vector<RawAction> generate_student_actions(const AssignmentConfig& config,
                                                const GenerationProfile& profile,
                                                const std::string& student_id, Timestamp start,
                                                std::mt19937_64& rng) {
  std::vector<RawAction> out;
  Timestamp now = start;
  const auto& flow = config.correct_flow;

  // Actions with a zero skip override are never skipped, not even by force.
  std::optional<std::size_t> forced_skip;
  if (profile.force_error && flow.size() >= 2) {
    std::size_t last = flow.size() - 2;
    if (profile.force_error_before > 0) last = std::min(last, profile.force_error_before - 1);
    std::vector<std::size_t> candidates;
    for (std::size_t i = profile.force_error_from; i <= last; ++i) {
      auto it = profile.skip_overrides.find(flow[i]);
      if (it == profile.skip_overrides.end() || it->second > 0.0) candidates.push_back(i);
    }
    if (!candidates.empty()) forced_skip = pick(rng, candidates);
  }

  // Off-flow actions grouped by phase, for wrong-action and wrong-phase noise.
  std::map<std::string, std::vector<std::string>> off_flow_by_phase;
  for (const auto& a : config.actions) {
    if (config.flow_index(a.code)) continue;
    const auto& d = profile.distractors;
    if (d.empty() || std::find(d.begin(), d.end(), a.code) != d.end()) off_flow_by_phase[a.phase].push_back(a.code);
  }

  std::vector<std::string> done;
  std::vector<bool> early(flow.size(), false);  // already emitted by a swap
  auto emit = [&](const std::string& code, std::chrono::seconds delay, std::optional<std::string> world) {
    now += delay;
    out.push_back({student_id, now, code, std::move(world)});
  };
  auto plain_delay = [&] {
    return std::chrono::seconds{std::uniform_int_distribution<long>(20, 60)(rng)};
  };

  auto distract = [&](double mean, const std::string& near) {
    const ActionSpec* spec = config.find(near);
    if (mean <= 0.0 || !spec) return;
    auto it = off_flow_by_phase.find(spec->phase);
    if (it == off_flow_by_phase.end() || it->second.empty()) return;
    const int n = std::poisson_distribution<int>(mean)(rng);
    for (int k = 0; k < n; ++k) {
      const auto& wrong = pick(rng, it->second);
      emit(wrong, plain_delay(), std::nullopt);
      done.push_back(wrong);
    }
  };
  if (!flow.empty()) distract(profile.leading_distractors, flow.front());

  for (std::size_t i = 0; i < flow.size(); ++i) {
    const std::string& code = flow[i];
    const ActionSpec* spec = config.find(code);
    if (!spec) continue;

    // Noise never separates an action from a timed successor.
    const bool timed = !spec->time_constraints.empty();
    const bool timed_next = i + 1 < flow.size() && config.find(flow[i + 1]) &&
                            !config.find(flow[i + 1])->time_constraints.empty();

    if (!timed && chance(rng, profile.wrong_action_probability)) {
      auto it = off_flow_by_phase.find(spec->phase);
      if (it != off_flow_by_phase.end() && !it->second.empty()) {
        const auto& wrong = pick(rng, it->second);
        emit(wrong, plain_delay(), std::nullopt);
        done.push_back(wrong);
      }
    }
    if (!timed && chance(rng, profile.wrong_phase_probability) && config.phases.size() > 1) {
      std::vector<std::string> foreign;
      for (const auto& a : config.actions) {
        const auto own = config.phase_index(a.phase);
        const auto here = config.phase_index(spec->phase);
        if (own && here && *own != *here && *own != *here + 1) foreign.push_back(a.code);
      }
      if (!foreign.empty()) emit(pick(rng, foreign), plain_delay(), std::nullopt);
    }

    auto override = profile.skip_overrides.find(code);
    const double skip_p =
        override != profile.skip_overrides.end() ? override->second : profile.skip_probability;
    const bool skipped = (forced_skip && *forced_skip == i) || chance(rng, skip_p);
    if (!skipped && !early[i] && i + 1 < flow.size() && chance(rng, profile.swap_probability)) {
      // The next action first; a blocked one is only attempted.
      const std::string& next = flow[i + 1];
      emit(next, plain_delay(), std::nullopt);
      if (!config.is_blocked(next)) {
        early[i + 1] = true;
        done.push_back(next);
      }
    }
    if (!skipped && !early[i]) {
      const bool violate = !spec->time_constraints.empty() && chance(rng, profile.time_violation_probability);
      std::optional<std::string> world;
      if (chance(rng, profile.world_error_probability)) world = "faileddrop";
      emit(code, step_delay(*spec, violate, rng), std::move(world));
      done.push_back(code);
    }
    if (!timed_next && !done.empty() && chance(rng, profile.repeat_probability)) {
      emit(pick(rng, done), plain_delay(), std::nullopt);
    }
  }
  if (!flow.empty()) distract(profile.trailing_distractors, flow.back());
  return out;
}

namespace {

std::string numbered_id(const std::string& prefix, std::size_t n) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%03zu", n);
  return prefix + buf;
}

}  // namespace

double synthetic_grade(const StudentLog& log, std::mt19937_64& rng) {
  std::size_t relevant = 0;
  std::size_t irrelevant = 0;
  for (const auto& e : log.events) {
    if (e.kind == EventKind::kFail && is_result_affecting(e.error_kind)) ++relevant;
    if (e.kind == EventKind::kTry || e.error_kind == ErrorKind::kAlreadyPerformed ||
        e.error_kind == ErrorKind::kNotFound) {
      ++irrelevant;
    }
  }
  double g = 10.0 - 0.25 * static_cast<double>(relevant) - 0.05 * static_cast<double>(irrelevant) +
             std::uniform_real_distribution<double>(-0.5, 0.5)(rng);
  g = std::clamp(g, 0.0, 10.0);
  return std::round(g * 10.0) / 10.0;
}

std::vector<StudentLog> generate_corpus(const AssignmentConfig& config,
                                        const std::vector<GenerationProfile>& profiles) {
  std::vector<StudentLog> logs;
  std::size_t running = 0;
  for (const auto& profile : profiles) {
    for (double p : {profile.skip_probability, profile.repeat_probability, profile.wrong_action_probability,
                     profile.wrong_phase_probability, profile.world_error_probability,
                     profile.time_violation_probability, profile.swap_probability}) {
      if (!(p >= 0.0 && p <= 1.0)) throw Error(Errc::invalid_argument, "probabilities must lie in [0,1]");
    }
    for (double m : {profile.leading_distractors, profile.trailing_distractors}) {
      if (!(m >= 0.0 && std::isfinite(m))) throw Error(Errc::invalid_argument, "distractor means must be finite and >= 0");
    }
    std::mt19937_64 rng(profile.seed);
    for (std::size_t i = 0; i < profile.count; ++i) {
      ++running;
      const std::string id = numbered_id(profile.id_prefix, running);
      const Timestamp start = profile.start + profile.spacing * static_cast<long>(i);
      StudentLog log = replay_student(generate_student_actions(config, profile, id, start, rng), config);
      log.student_id = id;
      if (log.events.empty()) {
        log.started_at = start;
        log.finished_at = start;
      }
      log.grade = synthetic_grade(log, rng);
      logs.push_back(std::move(log));
    }
  }
  return logs;
}

}  // namespace csm
