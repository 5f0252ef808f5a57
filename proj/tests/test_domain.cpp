#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>

#include "csm/domain.hpp"
#include "csm/fixtures.hpp"
#include "support.hpp"

using namespace csm;

namespace {

AssignmentConfig two_step() {
  AssignmentConfig c;
  c.assignment_id = "mini";
  c.phases = {"p"};
  c.correct_flow = {"a1", "a2"};
  for (const char* code : {"a1", "a2"}) {
    ActionSpec a;
    a.code = code;
    a.phase = "p";
    c.actions.push_back(a);
  }
  c.reindex();
  return c;
}

}  // namespace

TEST_CASE("timestamps parse and format in UTC") {
  const Timestamp t = parse_timestamp("2016-02-01T09:30:15Z");
  CHECK(format_timestamp(t) == "2016-02-01T09:30:15Z");
  CHECK(parse_timestamp("2016-02-01T09:30:15") == t);
  CHECK(parse_timestamp("2016-02-01T10:30:15+01:00") == t);
  CHECK(parse_timestamp("2016-02-01T09:30:15.250Z") == t);
  CHECK_THROWS_AS(parse_timestamp("2016-13-01T00:00:00Z"), Error);
  CHECK_THROWS_AS(parse_timestamp("yesterday"), Error);
  try {
    parse_timestamp("2016-02-30T00:00:00");
    FAIL("accepted February 30th");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::parse);
  }
}

TEST_CASE("enumerations round-trip through their wire names") {
  for (EventKind k : kAllEventKinds) CHECK(parse_event_kind(to_string(k)) == k);
  for (ErrorKind k : kAllErrorKinds) CHECK(parse_error_kind(to_string(k)) == k);
  for (Zone z : kAllZones) CHECK(parse_zone(to_string(z)) == z);
  CHECK(parse_zone("CORRECT_FLOW") == Zone::kCorrectFlow);
  CHECK(parse_zone("Relevant") == Zone::kRelevantErrors);
  CHECK_THROWS_AS(parse_zone("purple"), Error);
  CHECK_THROWS_AS(parse_event_kind("jump"), Error);
}

TEST_CASE("result-affecting errors") {
  CHECK(is_result_affecting(ErrorKind::kSimpleDependence));
  CHECK(is_result_affecting(ErrorKind::kComplexDependence));
  CHECK(is_result_affecting(ErrorKind::kIncompatibility));
  CHECK(is_result_affecting(ErrorKind::kTime));
  CHECK_FALSE(is_result_affecting(ErrorKind::kAlreadyPerformed));
  CHECK_FALSE(is_result_affecting(ErrorKind::kNotFound));
  CHECK_FALSE(is_result_affecting(ErrorKind::kNone));
}

TEST_CASE("validate_config") {
  SUBCASE("minimal valid config") { CHECK(validate_config(two_step()).empty()); }

  SUBCASE("undeclared dependency names both codes") {
    auto c = two_step();
    c.actions[1].dependencies = {"zz"};
    c.reindex();
    const auto v = validate_config(c);
    REQUIRE(v.size() == 1);
    CHECK(v[0].code == "a2");
    CHECK(v[0].rule == "dependency_exists");
    CHECK(v[0].message.find("zz") != std::string::npos);
  }

  SUBCASE("every invariant is checked") {
    auto c = two_step();
    c.correct_flow.push_back("a1");
    c.correct_flow.push_back("ghost");
    c.actions[0].weight = -1;
    c.actions[0].phase = "nowhere";
    c.actions[1].incompatibilities = {"zz"};
    c.actions[1].time_constraints = {{"a1", 10.0, 5.0}};
    c.blocked_actions = {"b9"};
    c.actions.push_back(c.actions[0]);
    c.reindex();
    std::vector<std::string> rules;
    for (const auto& v : validate_config(c)) rules.push_back(v.rule);
    for (const char* r : {"unique_code", "incompatibility_exists", "time_constraint_range", "weight_nonnegative",
                          "phase_declared", "flow_action_declared", "flow_duplicate_free",
                          "blocked_action_declared"}) {
      CHECK_MESSAGE(std::find(rules.begin(), rules.end(), r) != rules.end(), r);
    }
  }

  SUBCASE("idempotent and independent of action order") {
    auto c = demo_config();
    c.actions[3].dependencies.push_back("nope");
    c.actions[7].weight = -2;
    c.reindex();
    const auto first = validate_config(c);
    CHECK(validate_config(c) == first);
    std::mt19937 rng(5);
    for (int i = 0; i < 10; ++i) {
      std::shuffle(c.actions.begin(), c.actions.end(), rng);
      c.reindex();
      CHECK(validate_config(c) == first);
    }
  }

  SUBCASE("shipped demo configuration") {
    const auto c = load_config(test::data_dir() / "demo_config.json");
    CHECK(validate_config(c).empty());
    CHECK(c.phases.size() == 3);
    CHECK(c.actions.size() >= 100);
    CHECK(c.actions.size() <= 140);
    CHECK(c == demo_config());
  }
}

TEST_CASE("config JSON round trip and defaults") {
  const auto c = demo_config();
  CHECK(config_from_json(config_to_json(c)) == c);

  const auto doc = nlohmann::json::parse(R"({
    "assignment_id": "x", "phases": ["p"], "correct_flow": ["a"],
    "actions": [{"code": "a", "phase": "p", "time_constraints": [{"other": "a", "max_seconds": 4}]}]
  })");
  const auto parsed = config_from_json(doc);
  REQUIRE(parsed.actions.size() == 1);
  CHECK(parsed.actions[0].weight == 1.0);
  CHECK(parsed.blocked_actions.empty());
  CHECK_FALSE(parsed.actions[0].time_constraints[0].min_seconds.has_value());
  CHECK(parsed.actions[0].time_constraints[0].max_seconds == 4.0);
  CHECK(parsed.flow_index("a") == 0u);

  CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"phases": []})")), Error);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), Error);
}

TEST_CASE("event labels use the event subject") {
  StudentEvent fail{"s", test::t0(), EventKind::kFail, "f1t20", ErrorKind::kSimpleDependence, "f1t16"};
  CHECK(event_label(fail) == "fail f1t16");
  StudentEvent world{"s", test::t0(), EventKind::kFail, "f1t25", ErrorKind::kWorld, "faileddrop"};
  CHECK(event_label(world) == "fail faileddrop");
  StudentEvent d{"s", test::t0(), EventKind::kDo, "f1t20", ErrorKind::kNone, std::nullopt};
  CHECK(event_label(d) == "do f1t20");
}
