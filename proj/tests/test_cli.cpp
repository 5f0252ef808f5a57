#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <regex>
#include <sstream>

#include "csm/cli.hpp"
#include "csm/fixtures.hpp"
#include "csm/store.hpp"
#include "support.hpp"

using namespace csm;

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run csm_cli(const test::TempDir& store, std::vector<std::string> args) {
  args.insert(args.begin(), {"--store", store.path.string()});
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string field(const std::string& text, const std::string& name) {
  std::smatch m;
  if (!std::regex_search(text, m, std::regex(name + " (\\S+)"))) return "";
  return m[1];
}

}  // namespace

TEST_CASE("validate") {
  test::TempDir store;
  CHECK(csm_cli(store, {"validate", (test::data_dir() / "demo_config.json").string()}).out == "ok\n");
  const fs::path bad = store.path / "bad.json";
  std::ofstream(bad) << R"({"assignment_id":"x","phases":["p"],"correct_flow":["a"],
    "actions":[{"code":"a","phase":"p","dependencies":["ghost"]}]})";
  const Run r = csm_cli(store, {"validate", bad.string()});
  CHECK(r.code == 1);
  CHECK(r.out.find("dependency_exists") != std::string::npos);
}

TEST_CASE("generate reproduces the shipped fixtures") {
  test::TempDir store;
  for (const auto& [preset, file] : std::vector<std::pair<std::string, std::string>>{
           {"demo87", "corpus87.jsonl"}, {"two-population", "two_population.jsonl"}, {"two-period", "two_period.jsonl"}}) {
    const fs::path out = store.path / file;
    const Run r = csm_cli(store, {"generate", "--preset", preset, "-o", out.string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(test::read_text(out) == test::read_text(test::data_dir() / file));
  }
  const fs::path raw = store.path / "raw.jsonl";
  const fs::path cfg = store.path / "config.json";
  REQUIRE(csm_cli(store, {"generate", "--preset", "demo87", "--format", "raw", "-o", raw.string(), "--config-out",
                          cfg.string()})
              .code == 0);
  CHECK(test::read_text(raw) == test::read_text(test::data_dir() / "corpus87.raw.jsonl"));
  CHECK(load_config(cfg) == demo_config());

  const Run custom = csm_cli(store, {"generate", "--preset", "custom", "--count", "3", "--seed", "9", "--skip", "0.1"});
  CHECK(custom.code == 0);
  CHECK(custom.out.find("\"student_id\":\"s003\"") != std::string::npos);
  CHECK(csm_cli(store, {"generate", "--preset", "custom", "--skip", "1.5"}).code == 2);
  CHECK(csm_cli(store, {"generate", "--preset", "nope"}).code == 2);
}

TEST_CASE("ingest, build, compare, export and list") {
  test::TempDir store;
  const std::string config = (test::data_dir() / "demo_config.json").string();

  // Raw action streams and replayed events ingest to the same corpus.
  const Run raw = csm_cli(store, {"ingest", (test::data_dir() / "corpus87.raw.jsonl").string(), "-c", config});
  REQUIRE_MESSAGE(raw.code == 0, raw.err);
  CHECK(field(raw.out, "students") == "87");
  const Run ev = csm_cli(store, {"ingest", (test::data_dir() / "corpus87.jsonl").string(), "-c", config});
  REQUIRE(ev.code == 0);
  CHECK(field(ev.out, "events") == field(raw.out, "events"));

  const Run tp = csm_cli(store, {"ingest", (test::data_dir() / "two_period.jsonl").string(), "-c", config,
                                 "--changes", (test::data_dir() / "two_period_changes.json").string()});
  REQUIRE(tp.code == 0);
  const std::string corpus = field(tp.out, "corpus_id");
  REQUIRE(corpus.size() == 16);

  const fs::path empty_dir = store.path / "empty";
  fs::create_directories(empty_dir);
  const Run none = csm_cli(store, {"ingest", empty_dir.string(), "-c", config});
  CHECK(none.code == 1);
  CHECK(none.err.find("no student logs") != std::string::npos);

  const Run built = csm_cli(store, {"build", corpus, "--method", "none"});
  REQUIRE_MESSAGE(built.code == 0, built.err);
  CHECK(built.out.find("767") != std::string::npos);
  CHECK(built.out.find("1269") != std::string::npos);
  const std::string model = field(built.out, "model_id");
  REQUIRE(model.size() == 16);
  CHECK(csm_cli(store, {"build", corpus, "--feature", "height"}).code == 2);
  CHECK(csm_cli(store, {"build", "ffffffffffffffff"}).code == 1);

  const Run cmp = csm_cli(store, {"compare", corpus, "--from-a", "2013-01-01", "--to-a", "2015-12-31", "--from-b",
                                  "2016-01-01", "--to-b", "2016-12-31"});
  REQUIRE_MESSAGE(cmp.code == 0, cmp.err);
  CHECK(cmp.out.find("f1t20_f1t16") != std::string::npos);
  CHECK(cmp.out.find("mann-whitney U = 157") != std::string::npos);
  CHECK(cmp.out.find("f0t6_f0t5") == std::string::npos);  // below 30% in both periods
  const Run all_rows = csm_cli(store, {"compare", corpus, "--from-a", "2013-01-01", "--to-a", "2015-12-31",
                                       "--from-b", "2016-01-01", "--to-b", "2016-12-31", "--show-suppressed"});
  CHECK(all_rows.out.find("f0t6_f0t5") != std::string::npos);
  const Run js = csm_cli(store, {"compare", corpus, "--from-a", "2013-01-01", "--to-a", "2015-12-31", "--from-b",
                                 "2016-01-01", "--to-b", "2016-12-31", "--json"});
  CHECK(nlohmann::json::parse(js.out)["rows"].size() == 80);
  CHECK(csm_cli(store, {"compare", corpus, "--from-a", "2030-01-01", "--to-a", "2030-12-31", "--from-b",
                        "2016-01-01", "--to-b", "2016-12-31"})
            .code == 1);

  const Store s(store.path);
  const LayoutGraph layout = s.load_layout(model, 0);
  const Run svg = csm_cli(store, {"export", model, "--format", "svg"});
  REQUIRE(svg.code == 0);
  CHECK(svg.out == render_svg(layout));
  const fs::path dot = store.path / "graph.dot";
  REQUIRE(csm_cli(store, {"export", model, "--format", "dot", "-o", dot.string(), "--min-node-freq", "10"}).code == 0);
  CHECK(test::read_text(dot) == render_dot(filter_layout(layout, {10, 0})));
  CHECK(csm_cli(store, {"export", model, "--format", "png"}).code == 2);
  CHECK(csm_cli(store, {"export", model, "--cluster", "4"}).code == 1);

  const Run listed = csm_cli(store, {"list"});
  CHECK(listed.out.find("corpus " + corpus) != std::string::npos);
  CHECK(listed.out.find("model " + model) != std::string::npos);
}

TEST_CASE("usage errors and defaults") {
  test::TempDir store;
  CHECK(csm_cli(store, {}).code == 2);
  CHECK(csm_cli(store, {"frobnicate"}).code == 2);
  CHECK(csm_cli(store, {"serve", "--port", "70000"}).code == 2);
  const Run help = csm_cli(store, {"serve", "--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("8080") != std::string::npos);
}
