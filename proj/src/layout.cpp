#include "csm/layout.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>
#include <tuple>

namespace csm {

using nlohmann::json;

std::string Rgb::hex() const {
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r & 0xff, g & 0xff, b & 0xff);
  return buf;
}

Rgb Rgb::parse_hex(std::string_view text) {
  if (text.size() != 7 || text[0] != '#') throw Error(Errc::parse, "bad colour '" + std::string(text) + "'");
  auto channel = [&](std::size_t at) {
    int v = 0;
    for (std::size_t i = at; i < at + 2; ++i) {
      const char c = text[i];
      v *= 16;
      if (c >= '0' && c <= '9') v += c - '0';
      else if (c >= 'a' && c <= 'f') v += c - 'a' + 10;
      else if (c >= 'A' && c <= 'F') v += c - 'A' + 10;
      else throw Error(Errc::parse, "bad colour '" + std::string(text) + "'");
    }
    return v;
  };
  return {channel(1), channel(3), channel(5)};
}

Rgb fill_color(StateKind kind) {
  switch (kind) {
    case StateKind::kCorrect: return {4, 255, 117};
    case StateKind::kSimpleDependence: return {255, 128, 0};
    case StateKind::kComplexDependence: return {255, 153, 0};
    case StateKind::kIncompatibility: return {215, 104, 89};
    case StateKind::kTime: return {255, 255, 0};
    case StateKind::kWorld: return {204, 204, 0};
    case StateKind::kAlreadyPerformed:
    case StateKind::kNotFound:
    case StateKind::kSuperAlready:
    case StateKind::kSuperNotFound: return {241, 106, 239};
  }
  return {0, 0, 0};
}

Rgb outline_color(Zone zone) {
  switch (zone) {
    case Zone::kCorrectFlow: return {4, 255, 117};
    case Zone::kIrrelevantErrors: return {255, 255, 3};
    case Zone::kRelevantErrors: return {255, 0, 1};
  }
  return {0, 0, 0};
}

int edge_shade(double frequency) {
  if (!(frequency > 0.0) || frequency > 100.0) {
    throw Error(Errc::invalid_argument, "edge frequency out of range: " + std::to_string(frequency));
  }
  return static_cast<int>(std::lround(230.0 * (1.0 - frequency / 100.0)));
}

TextExtent default_text_metrics(std::string_view text) {
  return {7.0 * static_cast<double>(text.size()), 14.0};
}

const Band& LayoutGraph::band(Zone zone) const {
  for (const auto& b : bands) {
    if (b.zone == zone) return b;
  }
  throw Error(Errc::not_found, "no band for zone");
}

const LayoutNode* LayoutGraph::find_node(std::string_view key) const {
  for (const auto& n : nodes) {
    if (n.key == key) return &n;
  }
  return nullptr;
}

namespace {

bool on_flow_row(const StateNode& s) { return s.kind == StateKind::kCorrect && s.flow_index.has_value(); }

// Column 0 holds the start state; flow action i sits in column i + 1.
int column_of(const StateNode& s) {
  if (on_flow_row(s)) return *s.flow_index + 1;
  return std::max(s.id.anchor, -1) + 1;
}

int fail_rank(StateKind kind) {
  switch (kind) {
    case StateKind::kSimpleDependence:
    case StateKind::kComplexDependence: return 0;
    case StateKind::kIncompatibility: return 1;
    case StateKind::kTime: return 2;
    case StateKind::kWorld: return 3;
    default: return 4;
  }
}

int irrelevant_rank(StateKind kind) {
  switch (kind) {
    case StateKind::kSimpleDependence:
    case StateKind::kComplexDependence:
    case StateKind::kIncompatibility:
    case StateKind::kTime: return 0;
    case StateKind::kWorld: return 1;
    case StateKind::kAlreadyPerformed: return 2;
    case StateKind::kNotFound: return 3;
    default: return 4;
  }
}

using StackKey = std::tuple<int, int, std::string, int, std::string, std::string>;

StackKey stack_key(const StateNode& s, std::size_t index_of_action) {
  const int action_pos = static_cast<int>(index_of_action);
  switch (s.id.zone) {
    case Zone::kCorrectFlow:
      // Flow row first, then other correct-kind states.
      return {on_flow_row(s) ? 0 : 1, action_pos, s.id.action, 0, s.label, s.id.key()};
    case Zone::kRelevantErrors:
      if (s.kind == StateKind::kCorrect) return {0, action_pos, s.id.action, 0, s.label, s.id.key()};
      // One group per validated action: dependence, incompatibility, time, world.
      return {1, action_pos, s.id.action, fail_rank(s.kind), s.label, s.id.key()};
    case Zone::kIrrelevantErrors:
      return {irrelevant_rank(s.kind), action_pos, s.id.action, 0, s.label, s.id.key()};
  }
  return {};
}

}  // namespace

LayoutGraph compute_layout(const Automaton& a, const TextMetrics& metrics, const LayoutOptions& opt) {
  LayoutGraph g;
  g.cluster_id = a.cluster_id;
  g.n_students = a.n_students;
  g.initial = a.initial.key();

  const std::size_t n = a.states.size();
  g.nodes.resize(n);
  int max_col = 0;
  // Flow position of every action seen on a flow-row state, for stack ordering.
  std::map<std::string, int> action_pos;
  for (const auto& s : a.states) {
    if (s.flow_index) action_pos.emplace(s.id.action, *s.flow_index);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const StateNode& s = a.states[i];
    LayoutNode& node = g.nodes[i];
    node.state = s.id;
    node.key = s.id.key();
    node.label = s.label;
    node.kind = s.kind;
    node.fill = fill_color(s.kind);
    node.outline = outline_color(s.id.zone);
    node.count = s.students.size();
    node.frequency = frequency_of(s, a.n_students);
    const TextExtent text = metrics(s.label);
    node.width = text.width + opt.padding_x;
    node.height = std::max(text.height + opt.padding_y, opt.min_height);
    node.column = column_of(s);
    max_col = std::max(max_col, node.column);
  }

  // Stacks per (band, column).
  const std::size_t ncols = static_cast<std::size_t>(max_col) + 1;
  std::array<std::vector<std::vector<std::size_t>>, 3> stacks;
  for (auto& s : stacks) s.assign(ncols, {});
  for (std::size_t i = 0; i < n; ++i) {
    stacks[static_cast<int>(a.states[i].id.zone)][g.nodes[i].column].push_back(i);
  }
  for (auto& band : stacks) {
    for (auto& col : band) {
      std::vector<std::pair<StackKey, std::size_t>> keyed;
      for (std::size_t i : col) {
        const auto it = action_pos.find(a.states[i].id.action);
        const std::size_t pos = it == action_pos.end() ? std::numeric_limits<int>::max() : it->second;
        keyed.emplace_back(stack_key(a.states[i], pos), i);
      }
      std::sort(keyed.begin(), keyed.end());
      for (std::size_t k = 0; k < keyed.size(); ++k) col[k] = keyed[k].second;
    }
  }

  // Horizontal: every column is as wide as its widest (shifted) node.
  std::vector<double> col_width(ncols, 0.0);
  for (const auto& band : stacks) {
    for (std::size_t c = 0; c < ncols; ++c) {
      for (std::size_t k = 0; k < band[c].size(); ++k) {
        const double shift = (k % 2 == 1) ? opt.stack_shift : 0.0;
        col_width[c] = std::max(col_width[c], g.nodes[band[c][k]].width + shift);
      }
    }
  }
  std::vector<double> col_x(ncols, opt.margin);
  for (std::size_t c = 1; c < ncols; ++c) col_x[c] = col_x[c - 1] + col_width[c - 1] + opt.column_gap;
  for (const auto& band : stacks) {
    for (std::size_t c = 0; c < ncols; ++c) {
      for (std::size_t k = 0; k < band[c].size(); ++k) {
        g.nodes[band[c][k]].x = col_x[c] + ((k % 2 == 1) ? opt.stack_shift : 0.0);
      }
    }
  }

  // Vertical offset of the first row: column 0 is unshifted, then the row
  // alternates around its centre line.
  auto stagger = [&](std::size_t c) {
    if (c == 0) return 0.0;
    return (c % 2 == 1) ? opt.stagger / 2 : -opt.stagger / 2;
  };

  // Middle band, centred on y = 0 for now.
  const auto& mid = stacks[static_cast<int>(Zone::kCorrectFlow)];
  double half = 0.0;
  for (std::size_t c = 0; c < ncols; ++c) {
    double cursor = 0.0;
    for (std::size_t k = 0; k < mid[c].size(); ++k) {
      LayoutNode& node = g.nodes[mid[c][k]];
      if (k == 0) node.y = stagger(c) - node.height / 2;
      else node.y = cursor + opt.row_gap;
      cursor = node.y + node.height;
      half = std::max({half, std::abs(node.y), std::abs(node.y + node.height)});
    }
  }
  half += opt.band_padding;
  if (half < opt.min_height / 2 + opt.stagger / 2 + opt.band_padding) {
    half = opt.min_height / 2 + opt.stagger / 2 + opt.band_padding;
  }
  const double mid_top = -half;
  const double mid_bottom = half;

  // Bottom band grows downwards from the flow.
  const auto& low = stacks[static_cast<int>(Zone::kRelevantErrors)];
  double low_bottom = mid_bottom + 2 * opt.band_padding + opt.stagger;
  for (std::size_t c = 0; c < ncols; ++c) {
    double cursor = mid_bottom + opt.band_padding + opt.stagger / 2 + stagger(c);
    for (std::size_t k = 0; k < low[c].size(); ++k) {
      LayoutNode& node = g.nodes[low[c][k]];
      node.y = cursor;
      cursor = node.y + node.height + opt.row_gap;
      low_bottom = std::max(low_bottom, node.y + node.height + opt.band_padding);
    }
  }

  // Top band grows upwards from the flow.
  const auto& high = stacks[static_cast<int>(Zone::kIrrelevantErrors)];
  double high_top = mid_top - 2 * opt.band_padding - opt.stagger;
  for (std::size_t c = 0; c < ncols; ++c) {
    double cursor = mid_top - opt.band_padding - opt.stagger / 2 - stagger(c);
    for (std::size_t k = 0; k < high[c].size(); ++k) {
      LayoutNode& node = g.nodes[high[c][k]];
      node.y = cursor - node.height;
      cursor = node.y - opt.row_gap;
      high_top = std::min(high_top, node.y - opt.band_padding);
    }
  }

  const double dy = opt.margin - high_top;
  for (auto& node : g.nodes) node.y += dy;
  g.bands = {Band{Zone::kIrrelevantErrors, high_top + dy, mid_top + dy},
             Band{Zone::kCorrectFlow, mid_top + dy, mid_bottom + dy},
             Band{Zone::kRelevantErrors, mid_bottom + dy, low_bottom + dy}};
  g.height = low_bottom + dy + opt.margin;
  g.width = col_x.back() + col_width.back() + opt.margin;

  g.edges.reserve(a.edges.size());
  for (const auto& e : a.edges) {
    LayoutEdge le;
    le.from = e.from.key();
    le.to = e.to.key();
    le.key = e.key();
    le.count = e.students.size();
    le.frequency = frequency_of(e, a.n_students);
    le.shade = edge_shade(le.frequency);
    le.event_label = e.label();
    g.edges.push_back(std::move(le));
  }
  return g;
}

json layout_to_json(const LayoutGraph& g) {
  json nodes = json::array();
  for (const auto& n : g.nodes) {
    nodes.push_back({{"id", n.key},
                     {"x", n.x},
                     {"y", n.y},
                     {"w", n.width},
                     {"h", n.height},
                     {"fill", n.fill.hex()},
                     {"outline", n.outline.hex()},
                     {"label", n.label},
                     {"zone", to_string(n.state.zone)},
                     {"kind", to_string(n.kind)},
                     {"column", n.column},
                     {"count", n.count},
                     {"frequency", n.frequency}});
  }
  json edges = json::array();
  for (const auto& e : g.edges) {
    edges.push_back({{"id", e.key},
                     {"from", e.from},
                     {"to", e.to},
                     {"shade", e.shade},
                     {"count", e.count},
                     {"frequency", e.frequency},
                     {"event_label", e.event_label}});
  }
  json bands = json::array();
  for (const auto& b : g.bands) bands.push_back({{"zone", to_string(b.zone)}, {"top", b.top}, {"bottom", b.bottom}});
  return {{"cluster_id", g.cluster_id ? json(*g.cluster_id) : json(nullptr)},
          {"n_students", g.n_students},
          {"initial", g.initial},
          {"width", g.width},
          {"height", g.height},
          {"bands", std::move(bands)},
          {"nodes", std::move(nodes)},
          {"edges", std::move(edges)}};
}

LayoutGraph layout_from_json(const json& doc) {
  try {
    LayoutGraph g;
    if (!doc.at("cluster_id").is_null()) g.cluster_id = doc.at("cluster_id").get<int>();
    g.n_students = doc.at("n_students").get<std::size_t>();
    g.initial = doc.at("initial").get<std::string>();
    g.width = doc.at("width").get<double>();
    g.height = doc.at("height").get<double>();
    const auto& bands = doc.at("bands");
    if (bands.size() != 3) throw Error(Errc::parse, "layout needs three bands");
    for (std::size_t i = 0; i < 3; ++i) {
      g.bands[i] = {parse_zone(bands[i].at("zone").get<std::string>()), bands[i].at("top").get<double>(),
                    bands[i].at("bottom").get<double>()};
    }
    for (const auto& n : doc.at("nodes")) {
      LayoutNode node;
      node.key = n.at("id").get<std::string>();
      node.state = StateId::parse(node.key);
      node.x = n.at("x").get<double>();
      node.y = n.at("y").get<double>();
      node.width = n.at("w").get<double>();
      node.height = n.at("h").get<double>();
      node.fill = Rgb::parse_hex(n.at("fill").get<std::string>());
      node.outline = Rgb::parse_hex(n.at("outline").get<std::string>());
      node.label = n.at("label").get<std::string>();
      node.kind = parse_state_kind(n.at("kind").get<std::string>());
      node.column = n.at("column").get<int>();
      node.count = n.at("count").get<std::size_t>();
      node.frequency = n.at("frequency").get<double>();
      g.nodes.push_back(std::move(node));
    }
    for (const auto& e : doc.at("edges")) {
      LayoutEdge edge;
      edge.key = e.at("id").get<std::string>();
      edge.from = e.at("from").get<std::string>();
      edge.to = e.at("to").get<std::string>();
      edge.shade = e.at("shade").get<int>();
      edge.count = e.at("count").get<std::size_t>();
      edge.frequency = e.at("frequency").get<double>();
      edge.event_label = e.at("event_label").get<std::string>();
      g.edges.push_back(std::move(edge));
    }
    return g;
  } catch (const json::exception& e) {
    throw Error(Errc::parse, std::string("malformed layout document: ") + e.what());
  }
}

namespace {

std::string xml_escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string dot_escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

std::string gray(int shade) { return Rgb{shade, shade, shade}.hex(); }

std::string zone_band_fill(Zone zone) {
  switch (zone) {
    case Zone::kIrrelevantErrors: return "#fffff0";
    case Zone::kCorrectFlow: return "#f4fff8";
    case Zone::kRelevantErrors: return "#fff4f4";
  }
  return "#ffffff";
}

}  // namespace

std::string render_svg(const LayoutGraph& g) {
  std::map<std::string, const LayoutNode*> by_key;
  for (const auto& n : g.nodes) by_key.emplace(n.key, &n);

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << g.width << "\" height=\"" << g.height
      << "\" viewBox=\"0 0 " << g.width << ' ' << g.height << "\" font-family=\"monospace\" font-size=\"12\">\n";
  out << "<defs><marker id=\"arrow\" viewBox=\"0 0 10 10\" refX=\"10\" refY=\"5\" markerWidth=\"6\" "
         "markerHeight=\"6\" orient=\"auto-start-reverse\"><path d=\"M 0 0 L 10 5 L 0 10 z\" "
         "fill=\"context-stroke\"/></marker></defs>\n";
  for (const auto& b : g.bands) {
    out << "<rect class=\"band\" data-zone=\"" << to_string(b.zone) << "\" x=\"0\" y=\"" << b.top
        << "\" width=\"" << g.width << "\" height=\"" << (b.bottom - b.top) << "\" fill=\""
        << zone_band_fill(b.zone) << "\"/>\n";
  }
  for (const auto& e : g.edges) {
    auto f = by_key.find(e.from);
    auto t = by_key.find(e.to);
    if (f == by_key.end() || t == by_key.end()) continue;
    const LayoutNode& a = *f->second;
    const LayoutNode& b = *t->second;
    out << "<line x1=\"" << a.x + a.width / 2 << "\" y1=\"" << a.y + a.height / 2 << "\" x2=\""
        << b.x + b.width / 2 << "\" y2=\"" << b.y + b.height / 2 << "\" stroke=\"" << gray(e.shade)
        << "\" marker-end=\"url(#arrow)\"><title>" << xml_escape(e.event_label) << " (" << e.frequency
        << "%)</title></line>\n";
  }
  for (const auto& n : g.nodes) {
    out << "<g class=\"state\" data-id=\"" << xml_escape(n.key) << "\"><rect x=\"" << n.x << "\" y=\"" << n.y
        << "\" width=\"" << n.width << "\" height=\"" << n.height << "\" fill=\"" << n.fill.hex()
        << "\" stroke=\"" << n.outline.hex() << "\" stroke-width=\"2\"/><text x=\"" << n.x + n.width / 2
        << "\" y=\"" << n.y + n.height / 2 << "\" text-anchor=\"middle\" dominant-baseline=\"central\">"
        << xml_escape(n.label) << "</text><title>" << xml_escape(n.label) << " (" << n.frequency
        << "%)</title></g>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::string render_dot(const LayoutGraph& g) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) index.emplace(g.nodes[i].key, i);

  std::ostringstream out;
  out << "digraph automaton {\n  node [shape=box, style=filled, penwidth=2];\n";
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const LayoutNode& n = g.nodes[i];
    // Graphviz positions are in points with y growing upwards.
    out << "  n" << i << " [label=\"" << dot_escape(n.label) << "\", fillcolor=\"" << n.fill.hex()
        << "\", color=\"" << n.outline.hex() << "\", pos=\"" << n.x + n.width / 2 << ','
        << g.height - (n.y + n.height / 2) << "!\", tooltip=\"" << dot_escape(n.key) << "\"];\n";
  }
  for (const auto& e : g.edges) {
    auto f = index.find(e.from);
    auto t = index.find(e.to);
    if (f == index.end() || t == index.end()) continue;
    out << "  n" << f->second << " -> n" << t->second << " [color=\"" << gray(e.shade) << "\", tooltip=\""
        << dot_escape(e.event_label) << " (" << e.frequency << "%)\"];\n";
  }
  out << "}\n";
  return out.str();
}

}  // namespace csm
