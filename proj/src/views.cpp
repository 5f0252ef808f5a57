#include "csm/views.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>
#include <set>

namespace csm {

using nlohmann::json;

void FilterSpec::validate() const {
  auto ok = [](double v) { return v >= 0.0 && v <= 100.0; };
  if (!ok(min_node_freq) || !ok(min_edge_freq)) {
    throw Error(Errc::invalid_argument, "frequency thresholds must lie in [0, 100]");
  }
}

Automaton filter_graph(const Automaton& a, const FilterSpec& f) {
  f.validate();
  Automaton out;
  out.cluster_id = a.cluster_id;
  out.n_students = a.n_students;
  out.initial = a.initial;
  std::set<StateId> kept;
  for (const auto& s : a.states) {
    if (s.id == a.initial || frequency_of(s, a.n_students) >= f.min_node_freq) {
      kept.insert(s.id);
      out.states.push_back(s);
    }
  }
  for (const auto& e : a.edges) {
    if (frequency_of(e, a.n_students) >= f.min_edge_freq && kept.count(e.from) && kept.count(e.to)) {
      out.edges.push_back(e);
    }
  }
  return out;
}

LayoutGraph filter_layout(const LayoutGraph& g, const FilterSpec& f) {
  f.validate();
  LayoutGraph out = g;
  out.nodes.clear();
  out.edges.clear();
  std::set<std::string> kept;
  for (const auto& n : g.nodes) {
    if (n.key == g.initial || frequency_percent(n.count, g.n_students) >= f.min_node_freq) {
      kept.insert(n.key);
      out.nodes.push_back(n);
    }
  }
  for (const auto& e : g.edges) {
    if (frequency_percent(e.count, g.n_students) >= f.min_edge_freq && kept.count(e.from) && kept.count(e.to)) {
      out.edges.push_back(e);
    }
  }
  return out;
}

std::vector<StudentLog> logs_in_range(const std::vector<StudentLog>& logs, Timestamp from, Timestamp to) {
  if (from > to) throw Error(Errc::invalid_argument, "date range is inverted");
  std::vector<StudentLog> out;
  for (const auto& log : logs) {
    if (log.started_at >= from && log.started_at <= to) out.push_back(log);
  }
  return out;
}

Automaton date_view(const std::vector<StudentLog>& logs, Timestamp from, Timestamp to,
                    const AssignmentConfig& config) {
  const auto selected = logs_in_range(logs, from, to);
  if (selected.empty()) {
    throw Error(Errc::empty_input,
                "no data in range " + format_timestamp(from) + " .. " + format_timestamp(to));
  }
  return build_automaton(selected, config);
}

namespace {

const StudentLog& find_log(const std::vector<StudentLog>& logs, const std::string& student_id) {
  auto it = std::find_if(logs.begin(), logs.end(), [&](const StudentLog& l) { return l.student_id == student_id; });
  if (it == logs.end()) throw Error(Errc::not_found, "unknown student '" + student_id + "'");
  return *it;
}

}  // namespace

Automaton student_automaton(const std::vector<StudentLog>& logs, const std::string& student_id,
                            const AssignmentConfig& config) {
  return group_super_states(build_automaton({find_log(logs, student_id)}, config));
}

std::vector<TraceStep> student_trace(const std::vector<StudentLog>& logs, const std::string& student_id,
                                     const AssignmentConfig& config) {
  const StudentLog& log = find_log(logs, student_id);
  std::map<StateId, StateId> folded;
  const Automaton a = group_super_states(build_automaton({log}, config), &folded);
  auto mapped = [&](const StateId& id) {
    auto it = folded.find(id);
    return it == folded.end() ? id : it->second;
  };

  std::vector<TraceStep> trace;
  trace.push_back({*a.find_state(a.initial), std::nullopt, 0});
  StateId prev = a.initial;
  for (const auto& step : trace_path(log, config)) {
    const StateId id = mapped(step.state);
    if (id == prev && id.grouped) {
      ++trace.back().events;
      continue;
    }
    TraceStep t;
    t.state = *a.find_state(id);
    t.events = 1;
    for (const auto& e : a.edges) {
      if (e.from == prev && e.to == id && e.event_kind == step.event_kind && e.event_action == step.event_action) {
        t.via = e;
        break;
      }
    }
    trace.push_back(std::move(t));
    prev = id;
  }
  return trace;
}

namespace {

std::string lower(std::string_view text) {
  std::string out(text);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

std::vector<StateId> search_state(const Automaton& a, const std::string& query, std::optional<Zone> zone) {
  const std::string q = lower(query);
  std::vector<const StateNode*> hits;
  for (const auto& s : a.states) {
    if (zone && s.id.zone != *zone) continue;
    if (lower(s.label).rfind(q, 0) != 0) continue;
    hits.push_back(&s);
  }
  // States keep their canonical order among equal frequencies.
  std::stable_sort(hits.begin(), hits.end(),
                   [](const StateNode* x, const StateNode* y) { return x->students.size() > y->students.size(); });
  std::vector<StateId> out;
  for (const auto* s : hits) out.push_back(s->id);
  return out;
}

namespace {

json edge_summary(const EdgeRec& e, const Automaton& a) {
  return {{"id", e.key()},
          {"from", e.from.key()},
          {"to", e.to.key()},
          {"event_label", e.label()},
          {"count", e.students.size()},
          {"frequency", frequency_of(e, a.n_students)}};
}

const StateNode& state_at(const Automaton& a, const StateId& id) {
  const StateNode* s = a.find_state(id);
  if (!s) throw Error(Errc::not_found, "dangling edge endpoint " + id.key());
  return *s;
}

}  // namespace

json details_of(const Automaton& a, const std::string& key) {
  if (const StateNode* s = a.find_state(key)) {
    json incoming = json::array();
    json outgoing = json::array();
    for (const auto& e : a.edges) {
      if (e.to == s->id) incoming.push_back(edge_summary(e, a));
      if (e.from == s->id) outgoing.push_back(edge_summary(e, a));
    }
    return {{"type", "state"},
            {"id", s->id.key()},
            {"label", s->label},
            {"zone", to_string(s->id.zone)},
            {"kind", to_string(s->kind)},
            {"action", s->id.action},
            {"blamed", s->id.blamed ? json(*s->id.blamed) : json(nullptr)},
            {"error_kind", to_string(s->id.error)},
            {"anchor", s->id.anchor},
            {"group_size", s->group_size},
            {"count", s->students.size()},
            {"n_students", a.n_students},
            {"frequency", frequency_of(*s, a.n_students)},
            {"description", s->description},
            {"tutoring_message", s->tutoring_message ? json(*s->tutoring_message) : json(nullptr)},
            {"incoming", std::move(incoming)},
            {"outgoing", std::move(outgoing)}};
  }
  if (const EdgeRec* e = a.find_edge(key)) {
    const StateNode& from = state_at(a, e->from);
    const StateNode& to = state_at(a, e->to);
    json d = edge_summary(*e, a);
    d["type"] = "edge";
    d["n_students"] = a.n_students;
    d["event_kind"] = to_string(e->event_kind);
    d["event_action"] = e->event_action;
    d["from_label"] = from.label;
    d["to_label"] = to.label;
    d["zone"] = to_string(to.id.zone);
    return d;
  }
  throw Error(Errc::not_found, "unknown state or edge '" + key + "'");
}

Rational::Rational(std::int64_t n, std::int64_t d) {
  if (d == 0) throw Error(Errc::invalid_argument, "zero denominator");
  if (d < 0) {
    n = -n;
    d = -d;
  }
  const std::int64_t g = std::gcd(n < 0 ? -n : n, d);
  num = g ? n / g : 0;
  den = g ? d / g : 1;
}

std::string Rational::str() const { return std::to_string(num) + "/" + std::to_string(den); }

Rational operator-(const Rational& a, const Rational& b) {
  const std::int64_t l = std::lcm(a.den, b.den);
  return Rational(a.num * (l / a.den) - b.num * (l / b.den), l);
}

Rational operator-(const Rational& a) { return Rational(-a.num, a.den); }

std::strong_ordering operator<=>(const Rational& a, const Rational& b) {
  return a.num * b.den <=> b.num * a.den;
}

ChangeMap change_map_from_json(const json& doc) {
  ChangeMap out;
  try {
    if (doc.is_object()) {
      for (const auto& [k, v] : doc.items()) out[k] = v.get<std::string>();
    } else if (doc.is_array()) {
      for (const auto& item : doc) out[item.at("error").get<std::string>()] = item.at("change_id").get<std::string>();
    } else {
      throw Error(Errc::parse, "change map must be an object or an array");
    }
  } catch (const json::exception& e) {
    throw Error(Errc::parse, std::string("malformed change map: ") + e.what());
  }
  return out;
}

namespace {

std::map<ErrorKey, std::size_t> error_counts(const std::vector<StudentLog>& logs) {
  std::map<ErrorKey, std::size_t> counts;
  for (const auto& log : logs) {
    std::set<ErrorKey> seen;
    for (const auto& e : log.events) {
      if (e.kind != EventKind::kFail) continue;
      seen.insert({e.action_code, e.blamed_action ? *e.blamed_action : std::string(to_string(e.error_kind))});
    }
    for (const auto& k : seen) ++counts[k];
  }
  return counts;
}

std::size_t distinct_students(const std::vector<StudentLog>& logs) {
  std::set<std::string> ids;
  for (const auto& l : logs) ids.insert(l.student_id);
  return ids.size();
}

}  // namespace

PeriodComparison compare_periods(const std::vector<StudentLog>& logs_a, const std::vector<StudentLog>& logs_b,
                                 const AssignmentConfig& config, const ChangeMap& changes,
                                 const CompareOptions& options) {
  (void)config;
  if (logs_a.empty() || logs_b.empty()) throw Error(Errc::empty_input, "both periods need at least one log");
  PeriodComparison out;
  out.n_a = distinct_students(logs_a);
  out.n_b = distinct_students(logs_b);
  const auto ca = error_counts(logs_a);
  const auto cb = error_counts(logs_b);
  std::set<ErrorKey> keys;
  for (const auto& [k, c] : ca) keys.insert(k);
  for (const auto& [k, c] : cb) keys.insert(k);

  std::vector<double> changed;
  std::vector<double> unchanged;
  for (const auto& k : keys) {
    ComparisonRow row;
    row.key = k;
    auto it = ca.find(k);
    row.count_a = it == ca.end() ? 0 : it->second;
    it = cb.find(k);
    row.count_b = it == cb.end() ? 0 : it->second;
    row.freq_a = Rational(static_cast<std::int64_t>(row.count_a), static_cast<std::int64_t>(out.n_a));
    row.freq_b = Rational(static_cast<std::int64_t>(row.count_b), static_cast<std::int64_t>(out.n_b));
    row.difference = row.freq_a - row.freq_b;
    row.suppressed = row.freq_a.value() < options.suppress_below && row.freq_b.value() < options.suppress_below;
    if (auto c = changes.find(k.label()); c != changes.end()) row.change_id = c->second;
    else if (auto c2 = changes.find(k.error); c2 != changes.end()) row.change_id = c2->second;
    (row.change_id ? changed : unchanged).push_back(row.difference.value());
    out.rows.push_back(std::move(row));
  }

  try {
    out.t_test = welch_t_test(changed, unchanged);
  } catch (const Error& e) {
    out.notes.push_back(std::string("t-test skipped: ") + e.what());
  }
  std::vector<double> ga;
  std::vector<double> gb;
  for (const auto& l : logs_a) {
    if (l.grade) ga.push_back(*l.grade);
  }
  for (const auto& l : logs_b) {
    if (l.grade) gb.push_back(*l.grade);
  }
  if (ga.empty() || gb.empty()) {
    out.notes.push_back("U test skipped: grades missing in a period");
  } else {
    out.u_test = mann_whitney_u(ga, gb);
  }
  return out;
}

json trace_to_json(const std::vector<TraceStep>& trace, std::size_t n_students) {
  json steps = json::array();
  for (const auto& t : trace) {
    json via = nullptr;
    if (t.via) via = {{"id", t.via->key()}, {"event_label", t.via->label()}};
    steps.push_back({{"id", t.state.id.key()},
                     {"label", t.state.label},
                     {"zone", to_string(t.state.id.zone)},
                     {"kind", to_string(t.state.kind)},
                     {"fill", fill_color(t.state.kind).hex()},
                     {"outline", outline_color(t.state.id.zone).hex()},
                     {"events", t.events},
                     {"frequency", frequency_of(t.state, n_students)},
                     {"via", std::move(via)}});
  }
  return steps;
}

json comparison_to_json(const PeriodComparison& c) {
  json rows = json::array();
  for (const auto& r : c.rows) {
    rows.push_back({{"action", r.key.action},
                    {"error", r.key.error},
                    {"label", r.key.label()},
                    {"change_id", r.change_id ? json(*r.change_id) : json(nullptr)},
                    {"count_a", r.count_a},
                    {"count_b", r.count_b},
                    {"freq_a", r.freq_a.value()},
                    {"freq_b", r.freq_b.value()},
                    {"difference", r.difference.value()},
                    {"freq_a_exact", r.freq_a.str()},
                    {"freq_b_exact", r.freq_b.str()},
                    {"difference_exact", r.difference.str()},
                    {"suppressed", r.suppressed}});
  }
  json t = nullptr;
  if (c.t_test) {
    t = {{"t_statistic", c.t_test->t}, {"df", c.t_test->df}, {"p_value", c.t_test->p},
         {"mean_changed", c.t_test->mean_a}, {"mean_unchanged", c.t_test->mean_b}};
  }
  json u = nullptr;
  if (c.u_test) {
    u = {{"u_statistic", c.u_test->u}, {"p_value", c.u_test->p}, {"exact", c.u_test->exact}};
  }
  return {{"n_a", c.n_a}, {"n_b", c.n_b}, {"rows", std::move(rows)},
          {"t_test", std::move(t)}, {"u_test", std::move(u)}, {"notes", c.notes}};
}

}  // namespace csm
