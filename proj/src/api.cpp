#include "csm/api.hpp"

#include <charconv>
#include <vector>

#include <httplib.h>

namespace csm {

using nlohmann::json;

std::string error_body(std::string_view code, const std::string& message) {
  return json{{"error", {{"code", code}, {"message", message}}}}.dump();
}

int http_status(Errc code) {
  switch (code) {
    case Errc::not_found: return 404;
    case Errc::io: return 500;
    case Errc::invalid_argument:
    case Errc::parse:
    case Errc::empty_input: return 400;
  }
  return 500;
}

Timestamp parse_range_bound(const std::string& text, bool end_of_range) {
  if (text.size() == 10) {
    const Timestamp day = parse_timestamp(text + "T00:00:00");
    return end_of_range ? day + std::chrono::seconds{86399} : day;
  }
  return parse_timestamp(text);
}

namespace {

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i <= path.size()) {
    const std::size_t j = path.find('/', i);
    const std::size_t end = j == std::string::npos ? path.size() : j;
    if (end > i) out.push_back(path.substr(i, end - i));
    if (j == std::string::npos) break;
    i = j + 1;
  }
  return out;
}

std::optional<std::string> param(const QueryParams& q, const std::string& name) {
  auto it = q.find(name);
  if (it == q.end()) return std::nullopt;
  return it->second;
}

std::string required(const QueryParams& q, const std::string& name) {
  auto v = param(q, name);
  if (!v || v->empty()) throw Error(Errc::invalid_argument, "missing query parameter '" + name + "'");
  return *v;
}

double number_param(const QueryParams& q, const std::string& name, double fallback) {
  auto v = param(q, name);
  if (!v) return fallback;
  double out = 0;
  auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc{} || ptr != v->data() + v->size() || v->empty()) {
    throw Error(Errc::invalid_argument, "query parameter '" + name + "' is not a number: '" + *v + "'");
  }
  return out;
}

std::size_t cluster_index(const std::string& text) {
  std::size_t out = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
    throw Error(Errc::not_found, "unknown cluster '" + text + "'");
  }
  return out;
}

FilterSpec filter_from(const QueryParams& q) {
  FilterSpec f{number_param(q, "min_node_freq", 0), number_param(q, "min_edge_freq", 0)};
  f.validate();
  return f;
}

json summary_json(const ClusterSummary& c) {
  return {{"cluster_id", c.cluster_id}, {"n_students", c.n_students}, {"n_states", c.n_states}, {"n_edges", c.n_edges}};
}

json model_entry(const ModelMeta& m) {
  json clusters = json::array();
  for (const auto& c : m.clusters) clusters.push_back(summary_json(c));
  return {{"model_id", m.model_id},
          {"corpus_id", m.corpus_id},
          {"assignment_id", m.assignment_id},
          {"method", to_string(m.options.method)},
          {"feature", to_string(m.options.feature)},
          {"k", m.clustering.k},
          {"clusters", clusters}};
}

}  // namespace

Api::Api(Store store) : store_(std::move(store)) {}

std::shared_ptr<const Automaton> Api::automaton(const std::string& model, std::size_t cluster) const {
  std::lock_guard lock(mu_);
  auto& slot = automata_[{model, cluster}];
  if (!slot) slot = std::make_shared<const Automaton>(store_.load_automaton(model, cluster));
  return slot;
}

std::shared_ptr<const LayoutGraph> Api::layout(const std::string& model, std::size_t cluster) const {
  std::lock_guard lock(mu_);
  auto& slot = layouts_[{model, cluster}];
  if (!slot) slot = std::make_shared<const LayoutGraph>(store_.load_layout(model, cluster));
  return slot;
}

std::shared_ptr<const std::vector<StudentLog>> Api::logs(const std::string& corpus) const {
  std::lock_guard lock(mu_);
  auto& slot = logs_[corpus];
  if (!slot) slot = std::make_shared<const std::vector<StudentLog>>(store_.load_logs(corpus));
  return slot;
}

std::shared_ptr<const AssignmentConfig> Api::config(const std::string& corpus) const {
  std::lock_guard lock(mu_);
  auto& slot = configs_[corpus];
  if (!slot) slot = std::make_shared<const AssignmentConfig>(store_.load_config(corpus));
  return slot;
}

HttpResponse Api::get(const std::string& path, const QueryParams& query) const {
  HttpResponse r;
  try {
    r.body = route(path, query);
  } catch (const Error& e) {
    r.status = http_status(e.code());
    r.body = error_body(to_string(e.code()), e.what());
  } catch (const json::exception& e) {
    r.status = 500;
    r.body = error_body("internal", e.what());
  }
  return r;
}

std::string Api::route(const std::string& path, const QueryParams& q) const {
  const auto seg = split_path(path);
  auto no_route = [&]() -> std::string { throw Error(Errc::not_found, "no route for '" + path + "'"); };
  if (seg.empty() || seg[0] != "models") return no_route();

  if (seg.size() == 1) {
    json models = json::array();
    for (const auto& m : store_.list_models()) models.push_back(model_entry(m));
    return json{{"models", models}}.dump();
  }
  const std::string& model = seg[1];
  const ModelMeta meta = store_.model_meta(model);
  if (seg.size() == 2) return model_entry(meta).dump();

  const std::string& section = seg[2];
  if (section == "clusters") {
    if (seg.size() == 3) {
      json clusters = json::array();
      for (const auto& c : meta.clusters) clusters.push_back(summary_json(c));
      return json{{"model_id", model}, {"clusters", clusters}}.dump();
    }
    const std::size_t c = cluster_index(seg[3]);
    if (c >= meta.clusters.size()) throw Error(Errc::not_found, "model '" + model + "' has no cluster " + seg[3]);
    if (seg.size() == 4) return summary_json(meta.clusters[c]).dump();
    const std::string& what = seg[4];
    if (what == "graph" && seg.size() == 5) {
      return layout_to_json(filter_layout(*layout(model, c), filter_from(q))).dump();
    }
    if (what == "states" && seg.size() >= 6) {
      std::string key = seg[5];
      for (std::size_t i = 6; i < seg.size(); ++i) key += "/" + seg[i];
      return details_of(*automaton(model, c), key).dump();
    }
    if (what == "search" && seg.size() == 5) {
      std::optional<Zone> zone;
      if (auto z = param(q, "zone"); z && !z->empty()) zone = parse_zone(*z);
      const std::string query = param(q, "q").value_or("");
      const auto a = automaton(model, c);
      json results = json::array();
      for (const auto& id : search_state(*a, query, zone)) {
        const StateNode* s = a->find_state(id);
        results.push_back({{"id", id.key()},
                           {"label", s->label},
                           {"zone", to_string(s->id.zone)},
                           {"kind", to_string(s->kind)},
                           {"count", s->students.size()},
                           {"frequency", frequency_of(*s, a->n_students)}});
      }
      return json{{"query", query}, {"zone", zone ? json(to_string(*zone)) : json(nullptr)}, {"results", results}}
          .dump();
    }
    return no_route();
  }

  if (section == "date-view" && seg.size() == 3) {
    const Timestamp from = parse_range_bound(required(q, "from"), false);
    const Timestamp to = parse_range_bound(required(q, "to"), true);
    const FilterSpec f = filter_from(q);
    std::vector<StudentLog> pool;
    if (auto c = param(q, "cluster")) {
      pool = store_.cluster_logs(model, cluster_index(*c));
    } else {
      pool = *logs(meta.corpus_id);
    }
    const Automaton view = group_super_states(date_view(pool, from, to, *config(meta.corpus_id)));
    return layout_to_json(filter_layout(compute_layout(view), f)).dump();
  }

  if (section == "students" && seg.size() == 5 && seg[4] == "trace") {
    const auto& all = *logs(meta.corpus_id);
    const auto& cfg = *config(meta.corpus_id);
    const Automaton single = student_automaton(all, seg[3], cfg);
    json out = layout_to_json(compute_layout(single));
    out["student_id"] = seg[3];
    out["trace"] = trace_to_json(student_trace(all, seg[3], cfg), 1);
    return out.dump();
  }

  if (section == "compare" && seg.size() == 3) {
    const auto& all = *logs(meta.corpus_id);
    const auto a = logs_in_range(all, parse_range_bound(required(q, "from_a"), false),
                                 parse_range_bound(required(q, "to_a"), true));
    const auto b = logs_in_range(all, parse_range_bound(required(q, "from_b"), false),
                                 parse_range_bound(required(q, "to_b"), true));
    CompareOptions opts;
    opts.suppress_below = number_param(q, "suppress_below", opts.suppress_below);
    if (!(opts.suppress_below >= 0.0 && opts.suppress_below <= 1.0)) {
      throw Error(Errc::invalid_argument, "suppress_below must lie in [0, 1]");
    }
    return comparison_to_json(
               compare_periods(a, b, *config(meta.corpus_id), store_.load_changes(meta.corpus_id), opts))
        .dump();
  }
  return no_route();
}

struct ApiServer::Impl {
  httplib::Server server;
};

ApiServer::ApiServer(const Api& api) : impl_(std::make_unique<Impl>()) {
  impl_->server.Get(".*", [&api](const httplib::Request& req, httplib::Response& res) {
    QueryParams q;
    for (const auto& [k, v] : req.params) q.emplace(k, v);
    const HttpResponse r = api.get(req.path, q);
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  });
  auto reject = [](const httplib::Request&, httplib::Response& res) {
    res.status = 405;
    res.set_content(error_body("method_not_allowed", "the API is read-only"), "application/json");
  };
  impl_->server.Post(".*", reject);
  impl_->server.Put(".*", reject);
  impl_->server.Delete(".*", reject);
}

ApiServer::~ApiServer() = default;

int ApiServer::bind(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound <= 0) throw Error(Errc::io, "cannot listen on " + host + ":" + std::to_string(port));
  return bound;
}

void ApiServer::run() { impl_->server.listen_after_bind(); }

void ApiServer::stop() { impl_->server.stop(); }

}  // namespace csm
