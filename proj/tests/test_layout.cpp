#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>

#include "csm/fixtures.hpp"
#include "csm/layout.hpp"
#include "checks.hpp"

using namespace csm;

namespace {

// Noisy 85-student corpus, larger than 532 states / 2778 edges once built.
Automaton large_automaton(const AssignmentConfig& c) {
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
  return build_automaton(generate_corpus(c, {g}), c);
}

std::size_t check_invariants(const LayoutGraph& g) {
  std::size_t pairs = 0;
  CHECK(check::layout_violation(g, &pairs) == "");
  return pairs;
}

}  // namespace

TEST_CASE("colours") {
  CHECK(outline_color(Zone::kCorrectFlow) == Rgb{4, 255, 117});
  CHECK(outline_color(Zone::kIrrelevantErrors) == Rgb{255, 255, 3});
  CHECK(outline_color(Zone::kRelevantErrors) == Rgb{255, 0, 1});
  CHECK(fill_color(StateKind::kCorrect) == Rgb{4, 255, 117});
  CHECK(fill_color(StateKind::kSimpleDependence) == Rgb{255, 128, 0});
  CHECK(fill_color(StateKind::kComplexDependence) == Rgb{255, 153, 0});
  CHECK(fill_color(StateKind::kIncompatibility) == Rgb{215, 104, 89});
  CHECK(fill_color(StateKind::kTime) == Rgb{255, 255, 0});
  CHECK(fill_color(StateKind::kWorld) == Rgb{204, 204, 0});
  for (auto k : {StateKind::kAlreadyPerformed, StateKind::kNotFound, StateKind::kSuperAlready,
                 StateKind::kSuperNotFound}) {
    CHECK(fill_color(k) == Rgb{241, 106, 239});
  }
  CHECK(Rgb{215, 104, 89}.hex() == "#d76859");
  CHECK(Rgb::parse_hex("#D76859") == Rgb{215, 104, 89});
  CHECK_THROWS_AS(Rgb::parse_hex("d76859"), Error);
  CHECK_THROWS_AS(Rgb::parse_hex("#d7685g"), Error);
}

TEST_CASE("edge shade") {
  CHECK(edge_shade(100.0) == 0);
  CHECK(edge_shade(50.0) == 115);
  CHECK(edge_shade(1e-9) == 230);
  CHECK(edge_shade(100.0 / 87.0) == 227);  // round(230 * 86/87) = round(227.356)
  for (int f = 1; f < 100; ++f) CHECK(edge_shade(f) >= edge_shade(f + 1));
  CHECK_THROWS_AS(edge_shade(0.0), Error);
  CHECK_THROWS_AS(edge_shade(100.5), Error);
  CHECK_THROWS_AS(edge_shade(std::nan("")), Error);
}

TEST_CASE("six-action layout") {
  const auto c = test::six_action_config();
  const Automaton a = build_automaton({test::replayed("a", {"1", "2", "3", "4", "5", "6"}, c),
                                       test::replayed("b", {"1", "2", "3", "5", "4", "6"}, c),
                                       test::replayed("c", {"1", "1", "zz", "2", "AC", "3", "4", "5", "6"}, c)},
                                      c);
  const LayoutGraph g = compute_layout(a);
  check_invariants(g);
  REQUIRE(g.nodes.size() == a.states.size());
  REQUIRE(g.edges.size() == a.edges.size());

  // The flow row runs left to right in flow order.
  double last_x = -1.0;
  for (const char* code : {"1", "2", "3", "4", "5", "6"}) {
    const LayoutNode* n = g.find_node(std::string("correct:") + code + "::NONE:" +
                                      std::to_string(std::stoi(code) - 2));
    REQUIRE(n);
    CHECK(n->x > last_x);
    CHECK(n->column == std::stoi(code));
    last_x = n->x;
  }
  const LayoutNode* start = g.find_node(g.initial);
  REQUIRE(start);
  CHECK(start->column == 0);

  // Node boxes follow the text metrics.
  const LayoutNode* fail = g.find_node("relevant:5:4:SIMPLE_DEPENDENCE:2");
  REQUIRE(fail);
  CHECK(fail->width == 7.0 * 3 + 16);
  CHECK(fail->height == 24);
  CHECK(fail->fill == Rgb{255, 128, 0});
  CHECK(fail->outline == Rgb{255, 0, 1});

  // Custom metrics.
  const LayoutGraph wide = compute_layout(a, [](std::string_view) { return TextExtent{100, 40}; });
  check_invariants(wide);
  CHECK(wide.nodes[0].width == 116);
  CHECK(wide.nodes[0].height == 50);

  CHECK(layout_from_json(layout_to_json(g)) == g);
  CHECK_THROWS_AS(layout_from_json(nlohmann::json::object()), Error);
}

TEST_CASE("layout invariants on the shipped corpora") {
  const auto c = demo_config();
  for (const auto& a : {build_automaton(demo_corpus(c), c), group_super_states(build_automaton(demo_corpus(c), c)),
                        build_automaton(two_period_corpus(c), c)}) {
    CHECK(check_invariants(compute_layout(a)) > 0);
  }
}

TEST_CASE("layout at scale") {
  const auto c = demo_config();
  const Automaton a = large_automaton(c);
  REQUIRE(a.states.size() >= 532);
  REQUIRE(a.edges.size() >= 2778);
  const auto t0 = std::chrono::steady_clock::now();
  const LayoutGraph g = compute_layout(a);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  MESSAGE(a.states.size() << " states, " << a.edges.size() << " edges, " << seconds << " s");
  CHECK(seconds < 2.0);
  CHECK(check_invariants(g) > 0);
  CHECK(compute_layout(a) == g);
}

TEST_CASE("SVG and DOT output") {
  const auto c = test::six_action_config();
  const Automaton a = build_automaton({test::replayed("a<&>", {"1", "2", "3", "5", "4", "6"}, c)}, c);
  const LayoutGraph g = compute_layout(a);

  const std::string svg = render_svg(g);
  CHECK(svg.rfind("<svg xmlns=\"http://www.w3.org/2000/svg\"", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  std::size_t states = 0;
  for (std::size_t p = svg.find("class=\"state\""); p != std::string::npos; p = svg.find("class=\"state\"", p + 1)) {
    ++states;
  }
  CHECK(states == g.nodes.size());
  CHECK(svg.find("fill=\"#ff8000\" stroke=\"#ff0001\"") != std::string::npos);
  CHECK(svg.find("stroke=\"#000000\"") != std::string::npos);  // single-student edges are black

  const std::string dot = render_dot(g);
  CHECK(dot.rfind("digraph automaton {", 0) == 0);
  std::size_t arrows = 0;
  for (std::size_t p = dot.find(" -> "); p != std::string::npos; p = dot.find(" -> ", p + 1)) ++arrows;
  CHECK(arrows == g.edges.size());
  CHECK(dot.find("fillcolor=\"#04ff75\"") != std::string::npos);
}
