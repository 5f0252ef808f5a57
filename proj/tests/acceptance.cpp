// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <sstream>

#include "checks.hpp"
#include "csm/api.hpp"
#include "csm/cli.hpp"
#include "csm/clustering.hpp"
#include "csm/fixtures.hpp"
#include "csm/stats.hpp"
#include "csm/views.hpp"

using namespace csm;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// Returns a failure reason, or an empty string with `detail` filled in.
using Criterion = std::function<std::string(std::ostringstream& detail)>;

std::string describe(const std::vector<StudentEvent>& events) {
  std::string out;
  for (const auto& e : events) {
    if (!out.empty()) out += ", ";
    out += std::string(to_string(e.kind)) + " " + (e.kind == EventKind::kFail ? *e.blamed_action : e.action_code);
  }
  return "[" + out + "]";
}

std::string replay_semantics(std::ostringstream& d) {
  const auto c = test::six_action_config();
  auto last = [&](const std::vector<std::string>& codes) {
    const auto raw = test::script("s", codes);
    ReplayState state;
    for (std::size_t i = 0; i + 1 < raw.size(); ++i) state = classify_action(raw[i], state, c).state;
    return describe(classify_action(raw.back(), state, c).events);
  };
  const std::vector<std::pair<std::vector<std::string>, std::string>> cases{
      {{"1", "2", "3", "6"}, "[do 6, fail 4, fail 5]"},
      {{"1", "2", "3", "5"}, "[do 5, fail 4]"},
      {{"1", "2", "AC", "3"}, "[do 3, fail AC]"}};
  for (const auto& [codes, want] : cases) {
    const std::string got = last(codes);
    if (got != want) return "got " + got + ", want " + want;
    d << got << " ";
  }
  d << "exact";
  return {};
}

std::string frequency_oracle(std::ostringstream& d) {
  const auto t0 = Clock::now();
  const auto c = demo_config();
  const auto logs = parse_corpus(test::data_dir() / "corpus87.jsonl").logs;
  const Automaton a = build_automaton(logs, c);
  if (auto why = check::frequency_mismatch(a, logs, c); !why.empty()) return why;
  const double s = seconds_since(t0);
  d << logs.size() << " students, " << a.states.size() << " states, " << a.edges.size()
    << " edges; counts exact, percents 1e-9; " << s << " s (< 5 s)";
  if (s >= 5.0) return "took " + std::to_string(s) + " s";
  return {};
}

std::string color_fidelity(std::ostringstream& d) {
  const std::vector<std::pair<Rgb, Rgb>> table{
      {outline_color(Zone::kCorrectFlow), {4, 255, 117}},
      {outline_color(Zone::kIrrelevantErrors), {255, 255, 3}},
      {outline_color(Zone::kRelevantErrors), {255, 0, 1}},
      {fill_color(StateKind::kCorrect), {4, 255, 117}},
      {fill_color(StateKind::kSimpleDependence), {255, 128, 0}},
      {fill_color(StateKind::kComplexDependence), {255, 153, 0}},
      {fill_color(StateKind::kIncompatibility), {215, 104, 89}},
      {fill_color(StateKind::kTime), {255, 255, 0}},
      {fill_color(StateKind::kWorld), {204, 204, 0}},
      {fill_color(StateKind::kAlreadyPerformed), {241, 106, 239}},
  };
  for (const auto& [got, want] : table) {
    if (!(got == want)) return "got " + got.hex() + ", want " + want.hex();
  }
  if (!(fill_color(StateKind::kNotFound) == Rgb{241, 106, 239})) return "not-found fill differs";
  d << table.size() << " RGB triples bit-exact";
  return {};
}

std::string super_grouping(std::ostringstream& d) {
  std::mt19937_64 rng(2718);
  std::size_t groups = 0;
  const int cases = 1000;
  for (int i = 0; i < cases; ++i) {
    const auto rc = check::random_case(rng);
    if (auto why = check::grouping_violation(build_automaton(rc.logs, rc.config), &groups); !why.empty()) {
      return "case " + std::to_string(i) + ": " + why;
    }
  }
  if (groups == 0) return "no super-state was formed";
  d << cases << " random automata, " << groups << " super-states; idempotent, runs collapsed, mass preserved";
  return {};
}

std::string layout_invariants(std::ostringstream& d) {
  const auto c = demo_config();
  GenerationProfile g;
  g.count = 85;
  g.seed = 6;
  g.skip_probability = 0.04;
  g.repeat_probability = 0.08;
  g.wrong_action_probability = 0.08;
  g.wrong_phase_probability = 0.08;
  g.world_error_probability = 0.04;
  g.time_violation_probability = 0.04;
  g.swap_probability = 0.04;
  const Automaton a = build_automaton(generate_corpus(c, {g}), c);
  if (a.states.size() < 532 || a.edges.size() < 2778) return "test automaton too small";
  const auto t0 = Clock::now();
  const LayoutGraph layout = compute_layout(a);
  const double s = seconds_since(t0);
  std::size_t pairs = 0;
  if (auto why = check::layout_violation(layout, &pairs); !why.empty()) return why;
  if (pairs == 0) return "no dependence/incompatibility stack to check";
  for (const auto& small : {build_automaton(demo_corpus(c), c), build_automaton(two_period_corpus(c), c)}) {
    if (auto why = check::layout_violation(compute_layout(small)); !why.empty()) return why;
  }
  d << a.states.size() << " states, " << a.edges.size() << " edges: 0 overlaps, bands strict, " << pairs
    << " stack pairs ordered; " << s << " s (< 2 s)";
  if (s >= 2.0) return "took " + std::to_string(s) + " s";
  return {};
}

std::string clustering_recovery(std::ostringstream& d) {
  const auto c = demo_config();
  const auto logs = two_population_corpus(c);
  std::vector<Point> pts;
  std::vector<bool> truth;
  for (const auto& l : logs) {
    pts.push_back(feature_vector(l, c, FeatureFunction::kZoneEvents));
    truth.push_back(l.student_id[0] == 'b');
  }
  double worst = 1.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const ClusterResult r = xmeans(pts, 1, 8, seed);
    if (r.k != 2) return "seed " + std::to_string(seed) + " chose k=" + std::to_string(r.k);
    std::size_t same = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) same += (r.labels[i] == 1) == truth[i];
    const double acc = static_cast<double>(std::max(same, pts.size() - same)) / static_cast<double>(pts.size());
    if (acc < 0.95) return "seed " + std::to_string(seed) + " accuracy " + std::to_string(acc);
    worst = std::min(worst, acc);
  }
  std::size_t runs = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    for (std::size_t k : {1, 2, 3}) {
      const EmResult em = em_cluster(pts, k, seed);
      for (std::size_t i = 1; i < em.log_likelihood_history.size(); ++i) {
        if (em.log_likelihood_history[i] < em.log_likelihood_history[i - 1] - 1e-9) {
          return "EM log-likelihood decreased (seed " + std::to_string(seed) + ")";
        }
      }
      ++runs;
    }
  }
  d << "x-means k=2 on 100/100 seeds, worst accuracy " << worst << " (>= 0.95); EM non-decreasing in " << runs
    << " runs (slack 1e-9)";
  return {};
}

std::string statistics(std::ostringstream& d) {
  // scipy 1.15.3 reference values.
  const double tol = 1e-6;
  auto off = [&](double got, double want) { return std::abs(got - want) > tol * std::max(1.0, std::abs(want)); };
  const std::vector<double> a{4.1, 5.3, 6.2, 5.9, 4.8, 5.5, 6.7};
  const std::vector<double> b{6.9, 7.4, 5.8, 8.1, 7.7, 6.6, 8.4, 7.2, 9.0};
  const TTestResult t = welch_t_test(a, b);
  if (off(t.t, -4.22105352700393) || off(t.df, 13.64785488402765) || off(t.p, 0.0009018150923145134)) {
    return "Welch t-test differs";
  }
  const std::vector<double> x{1.1, 3.2, 5.3};
  const std::vector<double> y{2.4, 4.5, 6.6, 7.7};
  const UTestResult u = mann_whitney_u(x, y);
  if (u.u != 3.0 || off(u.p, 0.4)) return "exact Mann-Whitney differs";
  const std::vector<double> xt{1, 2, 2, 3, 3, 3, 4, 5, 5, 6};
  const std::vector<double> yt{3, 4, 4, 5, 6, 6, 7, 7, 8, 9, 9};
  const UTestResult ut = mann_whitney_u(xt, yt);
  if (ut.u != 15.5 || off(ut.p, 0.005625214779700691)) return "tied Mann-Whitney differs";
  d << "Welch t/df/p and Mann-Whitney U/p (exact and tied) match scipy to 1e-6";
  return {};
}

std::string period_comparison(std::ostringstream& d) {
  const auto c = demo_config();
  const auto logs = parse_corpus(test::data_dir() / "two_period.jsonl").logs;
  const auto a = logs_in_range(logs, parse_timestamp("2013-01-01T00:00:00Z"), parse_timestamp("2015-12-31T23:59:59Z"));
  const auto b = logs_in_range(logs, parse_timestamp("2016-01-01T00:00:00Z"), parse_timestamp("2016-12-31T23:59:59Z"));
  const auto changes = two_period_changes();
  const PeriodComparison fwd = compare_periods(a, b, c, changes);
  const ComparisonRow* row = nullptr;
  for (const auto& r : fwd.rows) {
    if (r.key.label() == "f1t20_f1t16") row = &r;
  }
  if (!row) return "row f1t20_f1t16 missing";
  if (!(row->freq_a == Rational(45, 68)) || !(row->freq_b == Rational(7, 17))) return "seeded frequencies differ";
  if (!(row->difference == Rational(1, 4))) return "difference is " + row->difference.str();
  const PeriodComparison back = compare_periods(b, a, c, changes);
  if (back.rows.size() != fwd.rows.size()) return "row sets differ when swapped";
  for (std::size_t i = 0; i < fwd.rows.size(); ++i) {
    if (!(back.rows[i].difference == -fwd.rows[i].difference)) return "swap did not negate " + fwd.rows[i].key.label();
  }
  d << "f1t20_f1t16: " << row->freq_a.str() << " (" << row->freq_a.value() << ") - " << row->freq_b.str() << " ("
    << row->freq_b.value() << ") = " << row->difference.str() << " exactly; " << fwd.rows.size()
    << " rows negate on swap";
  return {};
}

std::string filter_semantics(std::ostringstream& d) {
  const auto c = demo_config();
  const Automaton a = build_automaton(demo_corpus(c), c);
  std::size_t prev_nodes = a.states.size() + 1;
  std::size_t prev_edges = a.edges.size() + 1;
  for (int t = 0; t <= 100; ++t) {
    const FilterSpec f{static_cast<double>(t), static_cast<double>(t)};
    const Automaton g = filter_graph(a, f);
    if (!(filter_graph(g, f) == g)) return "not idempotent at " + std::to_string(t);
    if (g.states.size() > prev_nodes || g.edges.size() > prev_edges) return "not monotone at " + std::to_string(t);
    prev_nodes = g.states.size();
    prev_edges = g.edges.size();
  }

  test::TempDir tmp;
  Store store(tmp.path);
  const std::string model = store.build_model(store.put_corpus(c, demo_corpus(c)), {});
  const Api api(store);
  const Automaton grouped = group_super_states(build_automaton(demo_corpus(c), c, 0));
  for (const double t : {0.0, 5.0, 20.0}) {
    const auto r = api.get("/models/" + model + "/clusters/0/graph",
                           {{"min_node_freq", std::to_string(t)}, {"min_edge_freq", std::to_string(t)}});
    if (r.status != 200) return "graph endpoint returned " + std::to_string(r.status);
    if (r.body != layout_to_json(filter_layout(compute_layout(grouped), {t, t})).dump()) {
      return "graph endpoint differs from the library at threshold " + std::to_string(t);
    }
  }
  d << "101 thresholds idempotent and monotone; graph endpoint byte-identical at 3 thresholds";
  return {};
}

std::string headless(std::ostringstream& d) {
  test::TempDir tmp;
  const std::string root = tmp.path.string();
  std::ostringstream out, err;
  auto run = [&](std::vector<std::string> args) {
    args.insert(args.begin(), {"--store", root});
    out.str("");
    return run_cli(args, out, err);
  };
  if (run({"ingest", (test::data_dir() / "two_population.jsonl").string(), "-c",
           (test::data_dir() / "demo_config.json").string()}) != 0) {
    return "ingest failed: " + err.str();
  }
  const std::string ingested = out.str();
  const std::string corpus = ingested.substr(ingested.find("corpus_id ") + 10, 16);
  if (run({"build", corpus, "--method", "xmeans"}) != 0) return "build failed: " + err.str();
  const std::string built = out.str();
  const std::string model = built.substr(built.find("model_id ") + 9, 16);
  if (run({"export", model, "--format", "svg"}) != 0 || out.str().find("<svg") != 0) return "export failed";
  const Api api{Store(tmp.path)};
  if (api.get("/models/" + model + "/clusters/1/graph", {}).status != 200) return "API read failed";
  d << "ingest, build, export and API reads ran in-process with no UI component";
  return {};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, Criterion>> criteria{
      {"replay-semantics", replay_semantics},     {"frequency-oracle", frequency_oracle},
      {"color-fidelity", color_fidelity},         {"super-state-grouping", super_grouping},
      {"layout-invariants", layout_invariants},   {"clustering-recovery", clustering_recovery},
      {"statistics", statistics},                 {"period-comparison", period_comparison},
      {"filter-semantics", filter_semantics},     {"headless-suite", headless},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    std::ostringstream detail;
    std::string why;
    try {
      why = run(detail);
    } catch (const std::exception& e) {
      why = std::string("exception: ") + e.what();
    }
    if (why.empty()) {
      std::cout << "PASS " << name << ": " << detail.str() << "\n";
    } else {
      ++failed;
      std::cout << "FAIL " << name << ": " << why << "\n";
    }
  }
  return failed ? 1 : 0;
}
