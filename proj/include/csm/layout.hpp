#pragma once

// Zone-banded drawing of an automaton: irrelevant errors on top, the correct
// flow in the middle, relevant errors at the bottom. Output is plain geometry.

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "csm/automaton.hpp"

namespace csm {

struct Rgb {
  int r = 0;
  int g = 0;
  int b = 0;

  std::string hex() const;  // "#rrggbb"
  static Rgb parse_hex(std::string_view text);
  bool operator==(const Rgb&) const = default;
};

Rgb fill_color(StateKind kind);
Rgb outline_color(Zone zone);

// Gray level for an edge: round(230 * (1 - freq/100)). 0 is black.
// Throws unless 0 < freq <= 100.
int edge_shade(double frequency_percent);

struct TextExtent {
  double width = 0;
  double height = 0;
};
using TextMetrics = std::function<TextExtent(std::string_view)>;

// 7 px per character, 14 px line height.
TextExtent default_text_metrics(std::string_view text);

struct LayoutOptions {
  double padding_x = 16;       // added to the text width
  double padding_y = 10;       // added to the text height
  double min_height = 24;
  double column_gap = 40;      // between the widest nodes of adjacent columns
  double stagger = 18;         // alternating vertical offset of the flow row
  double stack_shift = 8;      // alternating horizontal offset inside stacks
  double row_gap = 10;         // between stacked nodes
  double band_padding = 20;
  double margin = 20;
};

struct LayoutNode {
  StateId state;
  std::string key;
  double x = 0;  // top-left corner
  double y = 0;
  double width = 0;
  double height = 0;
  Rgb fill;
  Rgb outline;
  std::string label;
  StateKind kind = StateKind::kCorrect;
  std::size_t count = 0;
  double frequency = 0;
  int column = 0;

  bool operator==(const LayoutNode&) const = default;
};

struct LayoutEdge {
  std::string from;  // state keys
  std::string to;
  std::string key;   // edge key of the automaton
  int shade = 0;
  std::size_t count = 0;
  double frequency = 0;
  std::string event_label;

  bool operator==(const LayoutEdge&) const = default;
};

struct Band {
  Zone zone = Zone::kCorrectFlow;
  double top = 0;
  double bottom = 0;

  bool operator==(const Band&) const = default;
};

struct LayoutGraph {
  std::optional<int> cluster_id;
  std::size_t n_students = 0;
  std::string initial;
  std::vector<LayoutNode> nodes;  // automaton state order
  std::vector<LayoutEdge> edges;  // automaton edge order
  std::array<Band, 3> bands;      // top to bottom: irrelevant, correct, relevant
  double width = 0;
  double height = 0;

  const Band& band(Zone zone) const;
  const LayoutNode* find_node(std::string_view key) const;
  bool operator==(const LayoutGraph&) const = default;
};

LayoutGraph compute_layout(const Automaton& automaton, const TextMetrics& metrics = default_text_metrics,
                           const LayoutOptions& options = {});

nlohmann::json layout_to_json(const LayoutGraph& graph);
LayoutGraph layout_from_json(const nlohmann::json& doc);

// Static renderings for headless use.
std::string render_svg(const LayoutGraph& graph);
std::string render_dot(const LayoutGraph& graph);

}  // namespace csm
