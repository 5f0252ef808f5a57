#include "csm/automaton.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>
#include <tuple>

namespace csm {

using nlohmann::json;

namespace {

std::string escape_component(const std::string& text) {
  std::string out;
  for (char c : text) {
    if (c == '%') out += "%25";
    else if (c == ':') out += "%3A";
    else if (c == '>') out += "%3E";
    else out += c;
  }
  return out;
}

std::string unescape_component(const std::string& text) {
  std::string out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '%' && i + 2 < text.size()) {
      const std::string hex = text.substr(i + 1, 2);
      if (hex == "25") out += '%';
      else if (hex == "3A") out += ':';
      else if (hex == "3E") out += '>';
      else throw Error(Errc::invalid_argument, "bad escape in state key '" + text + "'");
      i += 2;
    } else {
      out += text[i];
    }
  }
  return out;
}

}  // namespace

std::string StateId::key() const {
  std::string k = std::string(to_string(zone)) + ":" + escape_component(action) + ":" +
                  (blamed ? escape_component(*blamed) : std::string{}) + ":" +
                  std::string(to_string(error)) + ":" + std::to_string(anchor);
  if (grouped) k += ":group";
  return k;
}

StateId StateId::parse(const std::string& key) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = key.find(':', start);
    parts.push_back(key.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  if (parts.size() != 5 && !(parts.size() == 6 && parts[5] == "group")) {
    throw Error(Errc::invalid_argument, "malformed state key '" + key + "'");
  }
  StateId id;
  try {
    id.zone = parse_zone(parts[0]);
    id.action = unescape_component(parts[1]);
    if (!parts[2].empty()) id.blamed = unescape_component(parts[2]);
    id.error = parse_error_kind(parts[3]);
    id.anchor = std::stoi(parts[4]);
  } catch (const Error&) {
    throw Error(Errc::invalid_argument, "malformed state key '" + key + "'");
  } catch (const std::exception&) {
    throw Error(Errc::invalid_argument, "malformed state key '" + key + "'");
  }
  id.grouped = parts.size() == 6;
  return id;
}

std::string_view to_string(StateKind kind) {
  switch (kind) {
    case StateKind::kCorrect: return "CORRECT";
    case StateKind::kSimpleDependence: return "SIMPLE_DEP";
    case StateKind::kComplexDependence: return "COMPLEX_DEP";
    case StateKind::kIncompatibility: return "INCOMPAT";
    case StateKind::kTime: return "TIME";
    case StateKind::kWorld: return "WORLD";
    case StateKind::kAlreadyPerformed: return "ALREADY_PERFORMED";
    case StateKind::kNotFound: return "NOT_FOUND";
    case StateKind::kSuperAlready: return "SUPER_ALREADY";
    case StateKind::kSuperNotFound: return "SUPER_NOT_FOUND";
  }
  return "?";
}

StateKind parse_state_kind(std::string_view text) {
  for (StateKind k : kAllStateKinds) {
    if (to_string(k) == text) return k;
  }
  throw Error(Errc::parse, "unknown state kind '" + std::string(text) + "'");
}

std::string EdgeRec::label() const { return std::string(to_string(event_kind)) + " " + event_action; }

std::string EdgeRec::key() const { return from.key() + ">" + to.key() + ">" + label(); }

namespace {

auto state_order(const StateNode& s) { return std::tie(s.id.zone, s.id.anchor, s.label); }

}  // namespace

void Automaton::normalize() {
  std::sort(states.begin(), states.end(), [](const StateNode& a, const StateNode& b) {
    if (state_order(a) != state_order(b)) return state_order(a) < state_order(b);
    return a.id < b.id;
  });
  std::map<StateId, std::size_t> rank;
  for (std::size_t i = 0; i < states.size(); ++i) rank.emplace(states[i].id, i);
  auto rank_of = [&](const StateId& id) {
    auto it = rank.find(id);
    return it == rank.end() ? states.size() : it->second;
  };
  std::sort(edges.begin(), edges.end(), [&](const EdgeRec& a, const EdgeRec& b) {
    const auto ka = std::make_tuple(rank_of(a.from), rank_of(a.to), a.label());
    const auto kb = std::make_tuple(rank_of(b.from), rank_of(b.to), b.label());
    return ka < kb;
  });
}

const StateNode* Automaton::find_state(const StateId& id) const {
  auto it = std::find_if(states.begin(), states.end(), [&](const StateNode& s) { return s.id == id; });
  return it == states.end() ? nullptr : &*it;
}

const StateNode* Automaton::find_state(const std::string& key) const {
  StateId id;
  try {
    id = StateId::parse(key);
  } catch (const Error&) {
    return nullptr;
  }
  return find_state(id);
}

const EdgeRec* Automaton::find_edge(const std::string& key) const {
  auto it = std::find_if(edges.begin(), edges.end(), [&](const EdgeRec& e) { return e.key() == key; });
  return it == edges.end() ? nullptr : &*it;
}

double frequency_percent(std::size_t count, std::size_t n) {
  if (n == 0) throw Error(Errc::invalid_argument, "frequency over an empty cluster");
  return 100.0 * static_cast<double>(count) / static_cast<double>(n);
}

double frequency_of(const StateNode& node, std::size_t n) { return frequency_percent(node.students.size(), n); }

double frequency_of(const EdgeRec& edge, std::size_t n) { return frequency_percent(edge.students.size(), n); }

StateId initial_state_id() { return StateId{Zone::kCorrectFlow, "", std::nullopt, ErrorKind::kNone, -1, false}; }

namespace {

StateKind kind_of_fail(ErrorKind error) {
  switch (error) {
    case ErrorKind::kSimpleDependence: return StateKind::kSimpleDependence;
    case ErrorKind::kComplexDependence: return StateKind::kComplexDependence;
    case ErrorKind::kIncompatibility: return StateKind::kIncompatibility;
    case ErrorKind::kTime: return StateKind::kTime;
    case ErrorKind::kWorld: return StateKind::kWorld;
    case ErrorKind::kAlreadyPerformed: return StateKind::kAlreadyPerformed;
    case ErrorKind::kNotFound: return StateKind::kNotFound;
    case ErrorKind::kNone: break;
  }
  return StateKind::kCorrect;
}

// A blocked attempt is drawn with the colour of the rule that blocked it.
StateKind kind_of_blocked(const ActionSpec* spec, const std::optional<std::string>& blamed) {
  if (!spec || !blamed) return StateKind::kSimpleDependence;
  auto contains = [&](const std::vector<std::string>& v) {
    return std::find(v.begin(), v.end(), *blamed) != v.end();
  };
  if (contains(spec->incompatibilities) && !contains(spec->dependencies)) return StateKind::kIncompatibility;
  const bool timed = std::any_of(spec->time_constraints.begin(), spec->time_constraints.end(),
                                 [&](const TimeConstraint& tc) { return tc.other == *blamed; });
  if (timed && !contains(spec->dependencies)) return StateKind::kTime;
  return StateKind::kSimpleDependence;
}

bool relevant_fail(const StudentEvent& e, const AssignmentConfig& config) {
  if (is_result_affecting(e.error_kind)) return true;
  if (e.error_kind == ErrorKind::kWorld) {
    const ActionSpec* spec = config.find(e.action_code);
    return spec && spec->world_errors_relevant;
  }
  return false;
}

std::string event_context(const StudentLog& log, std::size_t i) {
  return "student '" + log.student_id + "' event " + std::to_string(i) + " (" + event_label(log.events[i]) + ")";
}

}  // namespace

std::vector<PathStep> trace_path(const StudentLog& log, const AssignmentConfig& config) {
  std::vector<PathStep> path;
  path.reserve(log.events.size());
  bool tainted = false;
  int anchor = -1;

  const auto& events = log.events;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const StudentEvent& e = events[i];
    const ActionSpec* spec = config.find(e.action_code);

    if (e.error_kind == ErrorKind::kNotFound && e.kind != EventKind::kFail) {
      path.push_back({StateId{Zone::kIrrelevantErrors, e.action_code, std::nullopt, e.error_kind, anchor},
                      StateKind::kNotFound, e.kind, e.action_code});
      continue;
    }
    if (!spec) throw Error(Errc::invalid_argument, "unknown action in " + event_context(log, i));

    if (e.kind == EventKind::kFail) {
      // A FAIL that is not attached to a preceding DO of the same action.
      if (e.error_kind == ErrorKind::kNone) {
        throw Error(Errc::invalid_argument, "fail without error kind in " + event_context(log, i));
      }
      if (e.error_kind != ErrorKind::kWorld && (!e.blamed_action || !config.find(*e.blamed_action))) {
        throw Error(Errc::invalid_argument, "blamed action missing from config in " + event_context(log, i));
      }
      const bool relevant = relevant_fail(e, config);
      path.push_back({StateId{relevant ? Zone::kRelevantErrors : Zone::kIrrelevantErrors, e.action_code,
                              e.blamed_action, e.error_kind, anchor},
                      kind_of_fail(e.error_kind), e.kind, event_subject(e)});
      tainted = tainted || relevant;
      continue;
    }
    if (e.error_kind == ErrorKind::kAlreadyPerformed) {
      path.push_back({StateId{Zone::kIrrelevantErrors, e.action_code, std::nullopt, e.error_kind, anchor},
                      StateKind::kAlreadyPerformed, e.kind, e.action_code});
      continue;
    }
    if (e.kind == EventKind::kTry) {
      path.push_back({StateId{Zone::kIrrelevantErrors, e.action_code, e.blamed_action, ErrorKind::kNone, anchor},
                      kind_of_blocked(spec, e.blamed_action), e.kind, e.action_code});
      continue;
    }

    // DO: its validation FAILs follow it directly and share its action code.
    std::size_t end = i + 1;
    bool relevant = false;
    while (end < events.size() && events[end].kind == EventKind::kFail &&
           events[end].action_code == e.action_code) {
      relevant = relevant || relevant_fail(events[end], config);
      ++end;
    }
    const Zone zone = tainted || relevant ? Zone::kRelevantErrors : Zone::kCorrectFlow;
    path.push_back({StateId{zone, e.action_code, std::nullopt, ErrorKind::kNone, anchor}, StateKind::kCorrect,
                    e.kind, e.action_code});
    for (std::size_t j = i + 1; j < end; ++j) {
      const StudentEvent& f = events[j];
      if (f.error_kind == ErrorKind::kNone) {
        throw Error(Errc::invalid_argument, "fail without error kind in " + event_context(log, j));
      }
      if (f.error_kind != ErrorKind::kWorld && (!f.blamed_action || !config.find(*f.blamed_action))) {
        throw Error(Errc::invalid_argument, "blamed action missing from config in " + event_context(log, j));
      }
      const bool r = relevant_fail(f, config);
      path.push_back({StateId{r ? Zone::kRelevantErrors : Zone::kIrrelevantErrors, f.action_code,
                              f.blamed_action, f.error_kind, anchor},
                      kind_of_fail(f.error_kind), f.kind, event_subject(f)});
    }
    tainted = tainted || relevant;
    if (auto pos = config.flow_index(e.action_code)) anchor = static_cast<int>(*pos);
    i = end - 1;
  }
  return path;
}

std::vector<Zone> event_zones(const StudentLog& log, const AssignmentConfig& config) {
  std::vector<Zone> zones;
  for (const auto& step : trace_path(log, config)) zones.push_back(step.state.zone);
  return zones;
}

namespace {

std::string label_for(const StateId& id) {
  if (id.action.empty() && !id.blamed) return "start";
  if (id.blamed) return id.action + "_" + *id.blamed;
  return id.action;
}

std::string description_for(const StateId& id, StateKind kind, const AssignmentConfig& config) {
  if (id.action.empty()) return "Start of the practical assignment";
  const ActionSpec* spec = config.find(id.action);
  std::string text = spec ? spec->description : std::string{};
  auto about = [&](const std::string& what) {
    const ActionSpec* b = id.blamed ? config.find(*id.blamed) : nullptr;
    std::string subject = id.blamed ? *id.blamed : std::string{};
    if (b && !b->description.empty()) subject += " (" + b->description + ")";
    return text + (text.empty() ? "" : ": ") + what + " " + subject;
  };
  switch (kind) {
    case StateKind::kSimpleDependence:
    case StateKind::kComplexDependence: return about("required action not performed");
    case StateKind::kIncompatibility: return about("incompatible action performed before");
    case StateKind::kTime: return about("time constraint violated relative to");
    case StateKind::kWorld: return about("world error");
    case StateKind::kAlreadyPerformed: return text + (text.empty() ? "" : ": ") + "action already performed";
    case StateKind::kNotFound: return text + (text.empty() ? "" : ": ") + "action not expected in this phase";
    default: return text;
  }
}

}  // namespace

Automaton build_automaton(const std::vector<StudentLog>& logs, const AssignmentConfig& config,
                          std::optional<int> cluster_id) {
  if (logs.empty()) throw Error(Errc::empty_input, "cannot build an automaton from zero logs");

  std::map<StateId, StateNode> states;
  std::map<std::tuple<StateId, StateId, EventKind, std::string>, EdgeRec> edges;
  auto touch_state = [&](const StateId& id, StateKind kind, const std::string& student) {
    auto [it, inserted] = states.try_emplace(id);
    if (inserted) {
      it->second.id = id;
      it->second.kind = kind;
      it->second.label = label_for(id);
      it->second.description = description_for(id, kind, config);
      if (const ActionSpec* spec = config.find(id.action)) it->second.tutoring_message = spec->tutoring_message;
      if (auto pos = config.flow_index(id.action)) it->second.flow_index = static_cast<int>(*pos);
    }
    it->second.students.insert(student);
  };

  const StateId initial = initial_state_id();
  for (const auto& log : logs) {
    touch_state(initial, StateKind::kCorrect, log.student_id);
    StateId prev = initial;
    for (const auto& step : trace_path(log, config)) {
      touch_state(step.state, step.kind, log.student_id);
      auto [it, inserted] = edges.try_emplace({prev, step.state, step.event_kind, step.event_action});
      if (inserted) {
        it->second.from = prev;
        it->second.to = step.state;
        it->second.event_kind = step.event_kind;
        it->second.event_action = step.event_action;
      }
      it->second.students.insert(log.student_id);
      prev = step.state;
    }
  }

  Automaton out;
  out.cluster_id = cluster_id;
  out.initial = initial;
  std::set<std::string> ids;
  for (const auto& log : logs) ids.insert(log.student_id);
  out.n_students = ids.size();
  for (auto& [id, node] : states) out.states.push_back(std::move(node));
  for (auto& [key, edge] : edges) out.edges.push_back(std::move(edge));
  out.normalize();
  return out;
}

namespace {

struct DisjointSets {
  std::vector<std::size_t> parent;
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

Automaton group_super_states(const Automaton& automaton, std::map<StateId, StateId>* folded) {
  const auto& states = automaton.states;
  std::map<StateId, std::size_t> index;
  for (std::size_t i = 0; i < states.size(); ++i) index.emplace(states[i].id, i);

  auto groupable = [](StateKind k) { return k == StateKind::kAlreadyPerformed || k == StateKind::kNotFound; };
  DisjointSets sets(states.size());
  for (const auto& e : automaton.edges) {
    auto a = index.find(e.from);
    auto b = index.find(e.to);
    if (a == index.end() || b == index.end() || a->second == b->second) continue;
    const StateKind ka = states[a->second].kind;
    if (groupable(ka) && ka == states[b->second].kind) sets.unite(a->second, b->second);
  }

  std::map<std::size_t, std::vector<std::size_t>> components;
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (groupable(states[i].kind)) components[sets.find(i)].push_back(i);
  }

  // Representative id per original state.
  std::vector<StateId> target(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) target[i] = states[i].id;
  std::vector<bool> in_group(states.size(), false);

  Automaton out;
  out.cluster_id = automaton.cluster_id;
  out.n_students = automaton.n_students;
  out.initial = automaton.initial;

  for (const auto& [root, members] : components) {
    if (members.size() < 2) continue;
    StateId id = states[members.front()].id;
    for (std::size_t m : members) id = std::min(id, states[m].id);
    id.anchor = std::numeric_limits<int>::max();
    for (std::size_t m : members) id.anchor = std::min(id.anchor, states[m].id.anchor);
    id.grouped = true;

    StateNode node;
    node.id = id;
    const bool already = states[members.front()].kind == StateKind::kAlreadyPerformed;
    node.kind = already ? StateKind::kSuperAlready : StateKind::kSuperNotFound;
    node.group_size = 0;
    for (std::size_t m : members) {
      node.students.insert(states[m].students.begin(), states[m].students.end());
      node.group_size += states[m].group_size;
      target[m] = id;
      in_group[m] = true;
      if (folded) (*folded)[states[m].id] = id;
    }
    node.label = std::string(already ? "already-performed" : "not-found") + " x" + std::to_string(node.group_size);
    node.description = std::to_string(node.group_size) +
                       (already ? " consecutive action-already-performed states"
                                : " consecutive action-not-found states");
    out.states.push_back(std::move(node));
  }
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (!in_group[i]) out.states.push_back(states[i]);
  }

  std::map<std::tuple<StateId, StateId, EventKind, std::string>, EdgeRec> merged;
  for (const auto& e : automaton.edges) {
    auto a = index.find(e.from);
    auto b = index.find(e.to);
    const StateId from = a == index.end() ? e.from : target[a->second];
    const StateId to = b == index.end() ? e.to : target[b->second];
    const bool internal = a != index.end() && b != index.end() && in_group[a->second] && in_group[b->second] &&
                          from == to;
    if (internal) continue;
    auto [it, inserted] = merged.try_emplace({from, to, e.event_kind, e.event_action});
    if (inserted) {
      it->second = e;
      it->second.from = from;
      it->second.to = to;
    } else {
      it->second.students.insert(e.students.begin(), e.students.end());
    }
  }
  for (auto& [key, edge] : merged) out.edges.push_back(std::move(edge));
  out.normalize();
  return out;
}

json automaton_to_json(const Automaton& a) {
  json states = json::array();
  for (const auto& s : a.states) {
    json node = {{"key", s.id.key()},
                 {"zone", to_string(s.id.zone)},
                 {"action", s.id.action},
                 {"blamed", s.id.blamed ? json(*s.id.blamed) : json(nullptr)},
                 {"error_kind", to_string(s.id.error)},
                 {"anchor", s.id.anchor},
                 {"grouped", s.id.grouped},
                 {"kind", to_string(s.kind)},
                 {"label", s.label},
                 {"description", s.description},
                 {"tutoring_message", s.tutoring_message ? json(*s.tutoring_message) : json(nullptr)},
                 {"group_size", s.group_size},
                 {"flow_index", s.flow_index ? json(*s.flow_index) : json(nullptr)},
                 {"count", s.students.size()},
                 {"frequency", frequency_of(s, a.n_students)},
                 {"students", s.students}};
    states.push_back(std::move(node));
  }
  json edges = json::array();
  for (const auto& e : a.edges) {
    edges.push_back({{"from", e.from.key()},
                     {"to", e.to.key()},
                     {"event_kind", to_string(e.event_kind)},
                     {"event_action", e.event_action},
                     {"event_label", e.label()},
                     {"count", e.students.size()},
                     {"frequency", frequency_of(e, a.n_students)},
                     {"students", e.students}});
  }
  return {{"cluster_id", a.cluster_id ? json(*a.cluster_id) : json(nullptr)},
          {"n_students", a.n_students},
          {"initial", a.initial.key()},
          {"states", std::move(states)},
          {"edges", std::move(edges)}};
}

Automaton automaton_from_json(const json& doc) {
  try {
    Automaton a;
    if (!doc.at("cluster_id").is_null()) a.cluster_id = doc.at("cluster_id").get<int>();
    a.n_students = doc.at("n_students").get<std::size_t>();
    a.initial = StateId::parse(doc.at("initial").get<std::string>());
    for (const auto& s : doc.at("states")) {
      StateNode node;
      node.id = StateId::parse(s.at("key").get<std::string>());
      node.kind = parse_state_kind(s.at("kind").get<std::string>());
      node.label = s.at("label").get<std::string>();
      node.description = s.value("description", std::string{});
      if (s.contains("tutoring_message") && !s.at("tutoring_message").is_null()) {
        node.tutoring_message = s.at("tutoring_message").get<std::string>();
      }
      node.group_size = s.value("group_size", std::size_t{1});
      if (s.contains("flow_index") && !s.at("flow_index").is_null()) node.flow_index = s.at("flow_index").get<int>();
      for (const auto& st : s.at("students")) node.students.insert(st.get<std::string>());
      a.states.push_back(std::move(node));
    }
    for (const auto& e : doc.at("edges")) {
      EdgeRec edge;
      edge.from = StateId::parse(e.at("from").get<std::string>());
      edge.to = StateId::parse(e.at("to").get<std::string>());
      edge.event_kind = parse_event_kind(e.at("event_kind").get<std::string>());
      edge.event_action = e.at("event_action").get<std::string>();
      for (const auto& st : e.at("students")) edge.students.insert(st.get<std::string>());
      a.edges.push_back(std::move(edge));
    }
    a.normalize();
    return a;
  } catch (const json::exception& e) {
    throw Error(Errc::parse, std::string("malformed automaton document: ") + e.what());
  }
}

}  // namespace csm
