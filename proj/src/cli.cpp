#include "csm/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "csm/api.hpp"
#include "csm/fixtures.hpp"
#include "csm/replay.hpp"
#include "csm/store.hpp"

namespace csm {

using nlohmann::json;

namespace {

void write_output(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  write_file_atomic(path, text);
}

std::string percent(double share) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(1) << share * 100.0;
  return ss.str();
}

struct GenerateArgs {
  std::string preset = "custom";
  std::string format = "events";
  std::string out;
  std::string config_out;
  std::string changes_out;
  std::string config_path;
  std::size_t count = 20;
  std::uint64_t seed = 1;
  double skip = 0.05;
  double repeat = 0.02;
  double wrong_action = 0.02;
  double wrong_phase = 0.01;
  double world_error = 0.0;
  double time_violation = 0.0;
  double swap = 0.0;
  std::string start = "2015-01-01";
  int spacing_days = 1;
  std::string prefix = "s";
};

int cmd_generate(const GenerateArgs& a, std::ostream& out) {
  AssignmentConfig config = a.config_path.empty() ? demo_config() : load_config(a.config_path);
  std::ostringstream text;
  if (a.preset == "demo87") {
    if (a.format == "raw") {
      write_raw_actions(text, demo_raw_actions(config));
    } else {
      write_corpus(text, demo_corpus(config));
    }
  } else if (a.preset == "two-population" || a.preset == "two-period") {
    if (a.format == "raw") throw Error(Errc::invalid_argument, "preset '" + a.preset + "' is only available as events");
    write_corpus(text, a.preset == "two-period" ? two_period_corpus(config) : two_population_corpus(config));
  } else {
    GenerationProfile p;
    p.count = a.count;
    p.seed = a.seed;
    p.skip_probability = a.skip;
    p.repeat_probability = a.repeat;
    p.wrong_action_probability = a.wrong_action;
    p.wrong_phase_probability = a.wrong_phase;
    p.world_error_probability = a.world_error;
    p.time_violation_probability = a.time_violation;
    p.swap_probability = a.swap;
    p.start = parse_range_bound(a.start, false);
    p.spacing = std::chrono::days{a.spacing_days};
    p.id_prefix = a.prefix;
    write_corpus(text, generate_corpus(config, {p}));
  }
  write_output(a.out, text.str(), out);
  if (!a.config_out.empty()) write_file_atomic(a.config_out, config_to_json(config).dump(2) + "\n");
  if (!a.changes_out.empty()) write_file_atomic(a.changes_out, json(two_period_changes()).dump(2) + "\n");
  return 0;
}

int cmd_ingest(Store& store, const std::vector<std::string>& paths, const std::string& config_path,
               const std::string& changes_path, std::ostream& out, std::ostream& err) {
  const AssignmentConfig config = load_config(config_path);
  if (auto v = validate_config(config); !v.empty()) {
    for (const auto& x : v) err << config_path << ": " << x.code << ": " << x.rule << ": " << x.message << "\n";
    throw Error(Errc::invalid_argument, "configuration '" + config_path + "' is invalid");
  }
  std::vector<std::filesystem::path> sources(paths.begin(), paths.end());
  const Corpus corpus = ingest_files(sources, config);
  for (const auto& d : corpus.diagnostics) err << d.file << ":" << d.line << ": " << d.message << "\n";
  if (corpus.logs.empty()) throw Error(Errc::empty_input, "no student logs found in the given sources");
  std::optional<ChangeMap> changes;
  if (!changes_path.empty()) changes = change_map_from_json(json::parse(read_file(changes_path)));
  const std::string id = store.put_corpus(config, corpus.logs, changes);
  std::size_t events = 0;
  for (const auto& l : corpus.logs) events += l.events.size();
  out << "students " << corpus.logs.size() << "\n"
      << "events " << events << "\n"
      << "diagnostics " << corpus.diagnostics.size() << "\n"
      << "corpus_id " << id << "\n";
  return 0;
}

int cmd_build(Store& store, const std::string& corpus_id, const BuildOptions& options, std::ostream& out) {
  const std::string id = store.build_model(corpus_id, options);
  const ModelMeta meta = store.model_meta(id);
  out << "method " << to_string(meta.options.method) << "  feature " << to_string(meta.options.feature) << "  k "
      << meta.clustering.k << "\n";
  out << std::left << std::setw(9) << "cluster" << std::setw(10) << "students" << std::setw(9) << "states"
      << "edges\n";
  for (const auto& c : meta.clusters) {
    out << std::left << std::setw(9) << c.cluster_id << std::setw(10) << c.n_students << std::setw(9) << c.n_states
        << c.n_edges << "\n";
  }
  out << "model_id " << id << "\n";
  return 0;
}

struct CompareArgs {
  std::string corpus_id;
  std::string from_a, to_a, from_b, to_b;
  std::string changes_path;
  double suppress_below = 0.30;
  bool show_suppressed = false;
  bool as_json = false;
};

int cmd_compare(Store& store, const CompareArgs& a, std::ostream& out) {
  const auto logs = store.load_logs(a.corpus_id);
  const auto config = store.load_config(a.corpus_id);
  const ChangeMap changes = a.changes_path.empty() ? store.load_changes(a.corpus_id)
                                                   : change_map_from_json(json::parse(read_file(a.changes_path)));
  const auto la = logs_in_range(logs, parse_range_bound(a.from_a, false), parse_range_bound(a.to_a, true));
  const auto lb = logs_in_range(logs, parse_range_bound(a.from_b, false), parse_range_bound(a.to_b, true));
  const PeriodComparison cmp = compare_periods(la, lb, config, changes, CompareOptions{a.suppress_below});
  if (a.as_json) {
    out << comparison_to_json(cmp).dump(2) << "\n";
    return 0;
  }
  out << "period a: " << cmp.n_a << " students, period b: " << cmp.n_b << " students\n";
  out << std::left << std::setw(24) << "error" << std::setw(8) << "change" << std::setw(9) << "freq_a" << std::setw(9)
      << "freq_b"
      << "difference\n";
  std::size_t hidden = 0;
  for (const auto& r : cmp.rows) {
    if (r.suppressed && !a.show_suppressed) {
      ++hidden;
      continue;
    }
    out << std::left << std::setw(24) << r.key.label() << std::setw(8) << r.change_id.value_or("-") << std::setw(9)
        << percent(r.freq_a.value()) << std::setw(9) << percent(r.freq_b.value()) << percent(r.difference.value())
        << "\n";
  }
  if (hidden) out << "(" << hidden << " rows below " << percent(a.suppress_below) << "% in both periods hidden)\n";
  if (cmp.t_test) {
    out << "welch t = " << cmp.t_test->t << ", df = " << cmp.t_test->df << ", p = " << cmp.t_test->p << "\n";
  }
  if (cmp.u_test) out << "mann-whitney U = " << cmp.u_test->u << ", p = " << cmp.u_test->p << "\n";
  for (const auto& n : cmp.notes) out << "note: " << n << "\n";
  return 0;
}

int cmd_export(Store& store, const std::string& model_id, std::size_t cluster, const std::string& format,
               const FilterSpec& filter, const std::string& path, std::ostream& out) {
  const LayoutGraph g = filter_layout(store.load_layout(model_id, cluster), filter);
  write_output(path, format == "svg" ? render_svg(g) : render_dot(g), out);
  return 0;
}

int cmd_list(const Store& store, std::ostream& out) {
  for (const auto& c : store.list_corpora()) {
    out << "corpus " << c.corpus_id << "  " << c.assignment_id << "  students " << c.n_students << "  events "
        << c.n_events << "\n";
  }
  for (const auto& m : store.list_models()) {
    out << "model " << m.model_id << "  corpus " << m.corpus_id << "  " << to_string(m.options.method) << "/"
        << to_string(m.options.feature) << "  k " << m.clustering.k << "\n";
  }
  return 0;
}

int cmd_validate(const std::string& path, std::ostream& out) {
  const auto violations = validate_config(load_config(path));
  for (const auto& v : violations) out << v.code << ": " << v.rule << ": " << v.message << "\n";
  if (violations.empty()) out << "ok\n";
  return violations.empty() ? 0 : 1;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Collective student model: ingest tutor logs, cluster students and serve the automata", "csm"};
  app.require_subcommand(1);
  std::string store_root;
  app.add_option("--store", store_root, std::string("Store root (default: $") + kStoreEnv + " or ./csm-store)");

  auto* validate = app.add_subcommand("validate", "Check an assignment configuration");
  std::string validate_path;
  validate->add_option("config", validate_path, "Configuration JSON")->required();

  auto* generate = app.add_subcommand("generate", "Write a synthetic corpus");
  GenerateArgs gen;
  generate->add_option("--preset", gen.preset, "demo87, two-population, two-period or custom")
      ->check(CLI::IsMember({"demo87", "two-population", "two-period", "custom"}))
      ->capture_default_str();
  generate->add_option("--format", gen.format, "events or raw")->check(CLI::IsMember({"events", "raw"}))->capture_default_str();
  generate->add_option("-o,--out", gen.out, "Output file (default: stdout)");
  generate->add_option("--config-out", gen.config_out, "Also write the assignment configuration");
  generate->add_option("--changes-out", gen.changes_out, "Also write the two-period change map");
  generate->add_option("--config", gen.config_path, "Assignment configuration (default: built-in demo)");
  generate->add_option("--count", gen.count, "Students (custom)")->check(CLI::PositiveNumber)->capture_default_str();
  generate->add_option("--seed", gen.seed, "Random seed (custom)")->capture_default_str();
  generate->add_option("--skip", gen.skip)->check(CLI::Range(0.0, 1.0))->capture_default_str();
  generate->add_option("--repeat", gen.repeat)->check(CLI::Range(0.0, 1.0))->capture_default_str();
  generate->add_option("--wrong-action", gen.wrong_action)->check(CLI::Range(0.0, 1.0))->capture_default_str();
  generate->add_option("--wrong-phase", gen.wrong_phase)->check(CLI::Range(0.0, 1.0))->capture_default_str();
  generate->add_option("--world-error", gen.world_error)->check(CLI::Range(0.0, 1.0))->capture_default_str();
  generate->add_option("--time-violation", gen.time_violation)->check(CLI::Range(0.0, 1.0))->capture_default_str();
  generate->add_option("--swap", gen.swap)->check(CLI::Range(0.0, 1.0))->capture_default_str();
  generate->add_option("--start", gen.start, "First start date")->capture_default_str();
  generate->add_option("--spacing-days", gen.spacing_days)->check(CLI::NonNegativeNumber)->capture_default_str();
  generate->add_option("--prefix", gen.prefix, "Student id prefix")->capture_default_str();

  auto* ingest = app.add_subcommand("ingest", "Replay and store student logs");
  std::vector<std::string> ingest_paths;
  std::string ingest_config, ingest_changes;
  ingest->add_option("paths", ingest_paths, "Log files or directories of *.jsonl")->required();
  ingest->add_option("-c,--config", ingest_config, "Assignment configuration")->required();
  ingest->add_option("--changes", ingest_changes, "Change map stored with the corpus");

  auto* build = app.add_subcommand("build", "Cluster a stored corpus and build its automata");
  std::string build_corpus, method = "none", feature = "zone-events";
  BuildOptions bopts;
  build->add_option("corpus_id", build_corpus)->required();
  build->add_option("--method", method)->check(CLI::IsMember({"none", "xmeans", "em"}))->capture_default_str();
  build->add_option("--feature", feature)
      ->check(CLI::IsMember({"errors", "errors-time", "zone-events"}))
      ->capture_default_str();
  build->add_option("--k-min", bopts.params.k_min)->check(CLI::PositiveNumber)->capture_default_str();
  build->add_option("--k-max", bopts.params.k_max)->check(CLI::PositiveNumber)->capture_default_str();
  build->add_option("--k", bopts.params.k, "Components for em")->check(CLI::PositiveNumber)->capture_default_str();
  build->add_option("--seed", bopts.params.seed)->capture_default_str();
  build->add_flag("--normalize", bopts.params.normalize, "z-score features before clustering");

  auto* serve_cmd = app.add_subcommand("serve", "Serve the store over HTTP");
  int port = 8080;
  std::string host = "127.0.0.1";
  serve_cmd->add_option("--port", port)->check(CLI::Range(0, 65535))->capture_default_str();
  serve_cmd->add_option("--host", host)->capture_default_str();

  auto* compare = app.add_subcommand("compare", "Compare error frequencies of two periods");
  CompareArgs cmp;
  compare->add_option("corpus_id", cmp.corpus_id)->required();
  compare->add_option("--from-a", cmp.from_a)->required();
  compare->add_option("--to-a", cmp.to_a)->required();
  compare->add_option("--from-b", cmp.from_b)->required();
  compare->add_option("--to-b", cmp.to_b)->required();
  compare->add_option("--changes", cmp.changes_path, "Change map (default: the one stored with the corpus)");
  compare->add_option("--suppress-below", cmp.suppress_below)->check(CLI::Range(0.0, 1.0))->capture_default_str();
  compare->add_flag("--show-suppressed", cmp.show_suppressed);
  compare->add_flag("--json", cmp.as_json);

  auto* export_cmd = app.add_subcommand("export", "Render a cluster's layout as SVG or DOT");
  std::string export_model, export_format = "svg", export_out;
  std::size_t export_cluster = 0;
  FilterSpec export_filter;
  export_cmd->add_option("model_id", export_model)->required();
  export_cmd->add_option("--cluster", export_cluster)->capture_default_str();
  export_cmd->add_option("--format", export_format)->check(CLI::IsMember({"svg", "dot"}))->capture_default_str();
  export_cmd->add_option("-o,--out", export_out, "Output file (default: stdout)");
  export_cmd->add_option("--min-node-freq", export_filter.min_node_freq)->check(CLI::Range(0.0, 100.0));
  export_cmd->add_option("--min-edge-freq", export_filter.min_edge_freq)->check(CLI::Range(0.0, 100.0));

  auto* list = app.add_subcommand("list", "List stored corpora and models");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }

  try {
    Store store = Store::open(store_root.empty() ? std::nullopt : std::optional<std::filesystem::path>(store_root));
    if (*validate) return cmd_validate(validate_path, out);
    if (*generate) return cmd_generate(gen, out);
    if (*ingest) return cmd_ingest(store, ingest_paths, ingest_config, ingest_changes, out, err);
    if (*build) {
      bopts.method = parse_cluster_method(method);
      bopts.feature = parse_feature_function(feature);
      return cmd_build(store, build_corpus, bopts, out);
    }
    if (*compare) return cmd_compare(store, cmp, out);
    if (*export_cmd) return cmd_export(store, export_model, export_cluster, export_format, export_filter, export_out, out);
    if (*list) return cmd_list(store, out);
    if (*serve_cmd) {
      Api api(store);
      ApiServer server(api);
      const int bound = server.bind(host, port);
      out << "serving " << store.root().string() << " on http://" << host << ":" << bound << std::endl;
      server.run();
      return 0;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == Errc::invalid_argument ? 2 : 1;
  } catch (const json::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace csm
