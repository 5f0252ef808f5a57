#include "csm/domain.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace csm {

using nlohmann::json;

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::not_found: return "not_found";
    case Errc::io: return "io";
    case Errc::parse: return "parse";
    case Errc::empty_input: return "empty_input";
  }
  return "unknown";
}

namespace {

int parse_int(std::string_view text, std::string_view whole) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw Error(Errc::parse, "malformed timestamp '" + std::string(whole) + "'");
  }
  return value;
}

}  // namespace

Timestamp parse_timestamp(std::string_view text) {
  // 0123456789012345678
  // YYYY-MM-DDThh:mm:ss
  auto bad = [&] { return Error(Errc::parse, "malformed timestamp '" + std::string(text) + "'"); };
  if (text.size() < 19 || text[4] != '-' || text[7] != '-' || (text[10] != 'T' && text[10] != ' ') ||
      text[13] != ':' || text[16] != ':') {
    throw bad();
  }
  using namespace std::chrono;
  const year_month_day date{year{parse_int(text.substr(0, 4), text)},
                            month{static_cast<unsigned>(parse_int(text.substr(5, 2), text))},
                            day{static_cast<unsigned>(parse_int(text.substr(8, 2), text))}};
  if (!date.ok()) throw bad();
  const int hh = parse_int(text.substr(11, 2), text);
  const int mm = parse_int(text.substr(14, 2), text);
  const int ss = parse_int(text.substr(17, 2), text);
  if (hh > 23 || mm > 59 || ss > 60) throw bad();

  std::string_view rest = text.substr(19);
  if (!rest.empty() && rest.front() == '.') {
    std::size_t i = 1;
    while (i < rest.size() && std::isdigit(static_cast<unsigned char>(rest[i]))) ++i;
    if (i == 1) throw bad();
    rest.remove_prefix(i);
  }
  seconds offset{0};
  if (rest == "Z" || rest.empty()) {
  } else if (rest.size() == 6 && (rest[0] == '+' || rest[0] == '-') && rest[3] == ':') {
    const int oh = parse_int(rest.substr(1, 2), text);
    const int om = parse_int(rest.substr(4, 2), text);
    offset = hours{oh} + minutes{om};
    if (rest[0] == '-') offset = -offset;
  } else {
    throw bad();
  }
  return sys_days{date} + hours{hh} + minutes{mm} + seconds{ss} - offset;
}

std::string format_timestamp(Timestamp ts) {
  using namespace std::chrono;
  const sys_days day_point = floor<days>(ts);
  const year_month_day date{day_point};
  const hh_mm_ss<seconds> tod{ts - day_point};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(date.year()),
                static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()),
                static_cast<int>(tod.hours().count()), static_cast<int>(tod.minutes().count()),
                static_cast<int>(tod.seconds().count()));
  return buf;
}

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::kDo: return "do";
    case EventKind::kTry: return "try";
    case EventKind::kFail: return "fail";
  }
  return "?";
}

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kSimpleDependence: return "SIMPLE_DEPENDENCE";
    case ErrorKind::kComplexDependence: return "COMPLEX_DEPENDENCE";
    case ErrorKind::kIncompatibility: return "INCOMPATIBILITY";
    case ErrorKind::kTime: return "TIME";
    case ErrorKind::kWorld: return "WORLD";
    case ErrorKind::kAlreadyPerformed: return "ALREADY_PERFORMED";
    case ErrorKind::kNotFound: return "NOT_FOUND";
    case ErrorKind::kNone: return "NONE";
  }
  return "?";
}

std::string_view to_string(Zone zone) {
  switch (zone) {
    case Zone::kCorrectFlow: return "correct";
    case Zone::kIrrelevantErrors: return "irrelevant";
    case Zone::kRelevantErrors: return "relevant";
  }
  return "?";
}

EventKind parse_event_kind(std::string_view text) {
  for (EventKind k : kAllEventKinds) {
    if (to_string(k) == text) return k;
  }
  throw Error(Errc::parse, "unknown event kind '" + std::string(text) + "'");
}

ErrorKind parse_error_kind(std::string_view text) {
  if (text.empty()) return ErrorKind::kNone;
  for (ErrorKind k : kAllErrorKinds) {
    if (to_string(k) == text) return k;
  }
  throw Error(Errc::parse, "unknown error kind '" + std::string(text) + "'");
}

Zone parse_zone(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "correct" || lower == "correct_flow") return Zone::kCorrectFlow;
  if (lower == "irrelevant" || lower == "irrelevant_errors") return Zone::kIrrelevantErrors;
  if (lower == "relevant" || lower == "relevant_errors") return Zone::kRelevantErrors;
  throw Error(Errc::invalid_argument, "unknown zone '" + std::string(text) + "'");
}

bool is_dependence(ErrorKind kind) {
  return kind == ErrorKind::kSimpleDependence || kind == ErrorKind::kComplexDependence;
}

bool is_result_affecting(ErrorKind kind) {
  return is_dependence(kind) || kind == ErrorKind::kIncompatibility || kind == ErrorKind::kTime;
}

void AssignmentConfig::reindex() {
  by_code_.clear();
  flow_pos_.clear();
  for (std::size_t i = 0; i < actions.size(); ++i) by_code_.emplace(actions[i].code, i);
  for (std::size_t i = 0; i < correct_flow.size(); ++i) flow_pos_.emplace(correct_flow[i], i);
}

const ActionSpec* AssignmentConfig::find(std::string_view code) const {
  auto it = by_code_.find(code);
  return it == by_code_.end() ? nullptr : &actions[it->second];
}

std::optional<std::size_t> AssignmentConfig::flow_index(std::string_view code) const {
  auto it = flow_pos_.find(code);
  if (it == flow_pos_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> AssignmentConfig::phase_index(std::string_view phase) const {
  auto it = std::find(phases.begin(), phases.end(), phase);
  if (it == phases.end()) return std::nullopt;
  return static_cast<std::size_t>(it - phases.begin());
}

bool AssignmentConfig::is_blocked(std::string_view code) const {
  return std::find(blocked_actions.begin(), blocked_actions.end(), code) != blocked_actions.end();
}

std::vector<Violation> validate_config(const AssignmentConfig& config) {
  std::vector<Violation> out;
  std::set<std::string> codes;
  std::set<std::string> duplicates;
  for (const auto& a : config.actions) {
    if (!codes.insert(a.code).second) duplicates.insert(a.code);
  }
  for (const auto& code : duplicates) {
    out.push_back({code, "unique_code", "action code '" + code + "' is declared more than once"});
  }
  const std::set<std::string> phases(config.phases.begin(), config.phases.end());

  for (const auto& a : config.actions) {
    if (a.code.empty()) out.push_back({"<config>", "nonempty_code", "an action has an empty code"});
    for (const auto& dep : a.dependencies) {
      if (!codes.count(dep)) {
        out.push_back({a.code, "dependency_exists",
                       "action '" + a.code + "' depends on undeclared action '" + dep + "'"});
      }
    }
    for (const auto& inc : a.incompatibilities) {
      if (!codes.count(inc)) {
        out.push_back({a.code, "incompatibility_exists",
                       "action '" + a.code + "' is incompatible with undeclared action '" + inc + "'"});
      }
    }
    for (const auto& tc : a.time_constraints) {
      if (!codes.count(tc.other)) {
        out.push_back({a.code, "time_constraint_exists",
                       "action '" + a.code + "' has a time constraint on undeclared action '" +
                           tc.other + "'"});
      }
      if (tc.min_seconds && tc.max_seconds && *tc.min_seconds > *tc.max_seconds) {
        out.push_back({a.code, "time_constraint_range",
                       "action '" + a.code + "' has min_seconds > max_seconds for '" + tc.other + "'"});
      }
    }
    if (!(a.weight >= 0.0) || !std::isfinite(a.weight)) {
      out.push_back({a.code, "weight_nonnegative", "action '" + a.code + "' has a negative weight"});
    }
    if (!phases.count(a.phase)) {
      out.push_back({a.code, "phase_declared",
                     "action '" + a.code + "' belongs to undeclared phase '" + a.phase + "'"});
    }
  }

  std::set<std::string> seen_flow;
  for (const auto& code : config.correct_flow) {
    if (!codes.count(code)) {
      out.push_back({code, "flow_action_declared",
                     "correct-flow action '" + code + "' has no action spec"});
    }
    if (!seen_flow.insert(code).second) {
      out.push_back({code, "flow_duplicate_free", "correct-flow action '" + code + "' repeats"});
    }
  }
  for (const auto& code : config.blocked_actions) {
    if (!codes.count(code)) {
      out.push_back({code, "blocked_action_declared",
                     "blocked action '" + code + "' has no action spec"});
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

namespace {

std::vector<std::string> string_list(const json& doc, const char* key) {
  if (!doc.contains(key) || doc.at(key).is_null()) return {};
  return doc.at(key).get<std::vector<std::string>>();
}

}  // namespace

AssignmentConfig config_from_json(const json& doc) {
  try {
    AssignmentConfig config;
    config.assignment_id = doc.at("assignment_id").get<std::string>();
    config.phases = string_list(doc, "phases");
    config.correct_flow = string_list(doc, "correct_flow");
    config.blocked_actions = string_list(doc, "blocked_actions");
    for (const auto& a : doc.at("actions")) {
      ActionSpec spec;
      spec.code = a.at("code").get<std::string>();
      spec.phase = a.value("phase", std::string{});
      spec.description = a.value("description", std::string{});
      spec.dependencies = string_list(a, "dependencies");
      spec.incompatibilities = string_list(a, "incompatibilities");
      if (a.contains("time_constraints") && !a.at("time_constraints").is_null()) {
        for (const auto& tc : a.at("time_constraints")) {
          TimeConstraint c;
          c.other = tc.at("other").get<std::string>();
          if (tc.contains("min_seconds") && !tc.at("min_seconds").is_null()) {
            c.min_seconds = tc.at("min_seconds").get<double>();
          }
          if (tc.contains("max_seconds") && !tc.at("max_seconds").is_null()) {
            c.max_seconds = tc.at("max_seconds").get<double>();
          }
          spec.time_constraints.push_back(std::move(c));
        }
      }
      spec.weight = a.contains("weight") && !a.at("weight").is_null() ? a.at("weight").get<double>() : 1.0;
      if (a.contains("tutoring_message") && !a.at("tutoring_message").is_null()) {
        spec.tutoring_message = a.at("tutoring_message").get<std::string>();
      }
      spec.world_errors_relevant = a.value("world_errors_relevant", false);
      config.actions.push_back(std::move(spec));
    }
    config.reindex();
    return config;
  } catch (const json::exception& e) {
    throw Error(Errc::parse, std::string("malformed assignment config: ") + e.what());
  }
}

json config_to_json(const AssignmentConfig& config) {
  json actions = json::array();
  for (const auto& a : config.actions) {
    json tcs = json::array();
    for (const auto& tc : a.time_constraints) {
      json c = {{"other", tc.other}};
      if (tc.min_seconds) c["min_seconds"] = *tc.min_seconds;
      if (tc.max_seconds) c["max_seconds"] = *tc.max_seconds;
      tcs.push_back(std::move(c));
    }
    json spec = {{"code", a.code},
                 {"phase", a.phase},
                 {"description", a.description},
                 {"dependencies", a.dependencies},
                 {"incompatibilities", a.incompatibilities},
                 {"time_constraints", std::move(tcs)},
                 {"weight", a.weight}};
    if (a.tutoring_message) spec["tutoring_message"] = *a.tutoring_message;
    if (a.world_errors_relevant) spec["world_errors_relevant"] = true;
    actions.push_back(std::move(spec));
  }
  return {{"assignment_id", config.assignment_id},
          {"phases", config.phases},
          {"correct_flow", config.correct_flow},
          {"blocked_actions", config.blocked_actions},
          {"actions", std::move(actions)}};
}

AssignmentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot read config '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::parse, "config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return config_from_json(doc);
}

const std::string& event_subject(const StudentEvent& event) {
  if (event.kind == EventKind::kFail && event.blamed_action) return *event.blamed_action;
  return event.action_code;
}

std::string event_label(const StudentEvent& event) {
  return std::string(to_string(event.kind)) + " " + event_subject(event);
}

}  // namespace csm
