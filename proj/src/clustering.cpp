#include "csm/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace csm {

using nlohmann::json;

std::string_view to_string(ClusterMethod method) {
  switch (method) {
    case ClusterMethod::kNone: return "none";
    case ClusterMethod::kXMeans: return "xmeans";
    case ClusterMethod::kEm: return "em";
  }
  return "?";
}

std::string_view to_string(FeatureFunction feature) {
  switch (feature) {
    case FeatureFunction::kErrors: return "errors";
    case FeatureFunction::kErrorsTime: return "errors-time";
    case FeatureFunction::kZoneEvents: return "zone-events";
  }
  return "?";
}

ClusterMethod parse_cluster_method(std::string_view text) {
  for (auto m : {ClusterMethod::kNone, ClusterMethod::kXMeans, ClusterMethod::kEm}) {
    if (to_string(m) == text) return m;
  }
  throw Error(Errc::invalid_argument, "unknown clustering method '" + std::string(text) + "'");
}

FeatureFunction parse_feature_function(std::string_view text) {
  for (auto f : {FeatureFunction::kErrors, FeatureFunction::kErrorsTime, FeatureFunction::kZoneEvents}) {
    if (to_string(f) == text) return f;
  }
  throw Error(Errc::invalid_argument, "unknown feature function '" + std::string(text) + "'");
}

double feature_error_coeff(const StudentLog& log, const AssignmentConfig& config) {
  double sum = 0.0;
  for (const auto& e : log.events) {
    if (e.kind != EventKind::kFail) continue;
    const ActionSpec* spec = e.blamed_action ? config.find(*e.blamed_action) : nullptr;
    if (!spec) spec = config.find(e.action_code);
    sum += spec ? spec->weight : 1.0;
  }
  return sum;
}

std::pair<double, double> feature_error_time(const StudentLog& log, const AssignmentConfig& config) {
  const double seconds = std::chrono::duration<double>(log.finished_at - log.started_at).count();
  if (!(seconds > 0.0)) {
    throw Error(Errc::invalid_argument, "log of student '" + log.student_id + "' has a non-positive duration");
  }
  return {feature_error_coeff(log, config), seconds};
}

std::array<std::size_t, 3> feature_zone_events(const StudentLog& log, const AssignmentConfig& config) {
  std::array<std::size_t, 3> counts{0, 0, 0};
  for (Zone z : event_zones(log, config)) {
    switch (z) {
      case Zone::kCorrectFlow: ++counts[0]; break;
      case Zone::kIrrelevantErrors: ++counts[1]; break;
      case Zone::kRelevantErrors: ++counts[2]; break;
    }
  }
  return counts;
}

Point feature_vector(const StudentLog& log, const AssignmentConfig& config, FeatureFunction feature) {
  switch (feature) {
    case FeatureFunction::kErrors: return {feature_error_coeff(log, config)};
    case FeatureFunction::kErrorsTime: {
      auto [ec, t] = feature_error_time(log, config);
      return {ec, t};
    }
    case FeatureFunction::kZoneEvents: {
      auto c = feature_zone_events(log, config);
      return {static_cast<double>(c[0]), static_cast<double>(c[1]), static_cast<double>(c[2])};
    }
  }
  return {};
}

namespace {

double squared_distance(const Point& a, const Point& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double t = a[i] - b[i];
    d += t * t;
  }
  return d;
}

void check_points(std::span<const Point> points) {
  if (points.empty()) throw Error(Errc::invalid_argument, "no points to cluster");
  const std::size_t dim = points.front().size();
  if (dim == 0) throw Error(Errc::invalid_argument, "points have no dimensions");
  for (const auto& p : points) {
    if (p.size() != dim) throw Error(Errc::invalid_argument, "points have inconsistent dimensions");
    for (double v : p) {
      if (!std::isfinite(v)) throw Error(Errc::invalid_argument, "points must be finite");
    }
  }
}

std::size_t nearest(const Point& p, const std::vector<Point>& centroids) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    const double d = squared_distance(p, centroids[c]);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

// Renumbers clusters by first appearance and drops empty ones.
void compact(ClusterResult& r) {
  std::vector<std::size_t> remap(r.centroids.size(), std::numeric_limits<std::size_t>::max());
  std::vector<Point> centroids;
  for (auto& label : r.labels) {
    if (remap[label] == std::numeric_limits<std::size_t>::max()) {
      remap[label] = centroids.size();
      centroids.push_back(r.centroids[label]);
    }
    label = remap[label];
  }
  r.centroids = std::move(centroids);
  r.k = r.centroids.size();
}

std::vector<Point> kmeanspp_seeds(std::span<const Point> points, std::size_t k, std::mt19937_64& rng) {
  std::vector<Point> seeds;
  seeds.push_back(points[std::uniform_int_distribution<std::size_t>(0, points.size() - 1)(rng)]);
  std::vector<double> d2(points.size());
  while (seeds.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& s : seeds) best = std::min(best, squared_distance(points[i], s));
      d2[i] = best;
      total += best;
    }
    std::size_t chosen = 0;
    if (total <= 0.0) {
      chosen = std::uniform_int_distribution<std::size_t>(0, points.size() - 1)(rng);
    } else {
      double u = std::uniform_real_distribution<double>(0.0, total)(rng);
      chosen = points.size() - 1;
      for (std::size_t i = 0; i < points.size(); ++i) {
        if (d2[i] <= 0.0) continue;
        if (u < d2[i]) {
          chosen = i;
          break;
        }
        u -= d2[i];
      }
      while (d2[chosen] <= 0.0 && chosen > 0) --chosen;
    }
    seeds.push_back(points[chosen]);
  }
  return seeds;
}

}  // namespace

ClusterResult lloyd(std::span<const Point> points, std::vector<Point> centroids) {
  check_points(points);
  ClusterResult r;
  r.labels.assign(points.size(), 0);
  const std::size_t dim = points.front().size();
  for (std::size_t it = 0; it < 100; ++it) {
    r.iterations = it + 1;
    for (std::size_t i = 0; i < points.size(); ++i) r.labels[i] = nearest(points[i], centroids);
    std::vector<Point> sums(centroids.size(), Point(dim, 0.0));
    std::vector<std::size_t> counts(centroids.size(), 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      for (std::size_t d = 0; d < dim; ++d) sums[r.labels[i]][d] += points[i][d];
      ++counts[r.labels[i]];
    }
    double shift = 0.0;
    for (std::size_t c = 0; c < centroids.size(); ++c) {
      if (counts[c] == 0) continue;  // keeps its position; dropped by compact() if still empty
      for (std::size_t d = 0; d < dim; ++d) sums[c][d] /= static_cast<double>(counts[c]);
      shift = std::max(shift, std::sqrt(squared_distance(sums[c], centroids[c])));
      centroids[c] = sums[c];
    }
    if (shift < 1e-6) break;
  }
  for (std::size_t i = 0; i < points.size(); ++i) r.labels[i] = nearest(points[i], centroids);
  r.centroids = std::move(centroids);
  compact(r);
  r.inertia = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) r.inertia += squared_distance(points[i], r.centroids[r.labels[i]]);
  return r;
}

ClusterResult kmeans(std::span<const Point> points, std::size_t k, std::uint64_t seed) {
  check_points(points);
  if (k == 0) throw Error(Errc::invalid_argument, "k must be at least 1");
  if (k > points.size()) {
    throw Error(Errc::invalid_argument,
                "k = " + std::to_string(k) + " exceeds the number of points (" + std::to_string(points.size()) + ")");
  }
  std::mt19937_64 rng(seed);
  return lloyd(points, kmeanspp_seeds(points, k, rng));
}

double spherical_bic(std::span<const Point> points, std::span<const std::size_t> labels,
                     std::span<const Point> centroids) {
  const double R = static_cast<double>(points.size());
  const double K = static_cast<double>(centroids.size());
  const double M = static_cast<double>(points.front().size());
  std::vector<double> sizes(centroids.size(), 0.0);
  double sse = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    sizes[labels[i]] += 1.0;
    sse += squared_distance(points[i], centroids[labels[i]]);
  }
  if (R <= K) return -std::numeric_limits<double>::infinity();
  // Pelleg-Moore estimate: pooled squared distance over R - K.
  const double variance = std::max(sse / (R - K), 1e-10);
  double ll = 0.0;
  for (double rn : sizes) {
    if (rn <= 0.0) continue;
    ll += -0.5 * rn * std::log(2.0 * std::numbers::pi) - 0.5 * rn * M * std::log(variance) -
          0.5 * (rn - K) + rn * std::log(rn) - rn * std::log(R);
  }
  const double params = (K - 1.0) + K * M + 1.0;
  return ll - 0.5 * params * std::log(R);
}

ClusterResult xmeans(std::span<const Point> points, std::size_t k_min, std::size_t k_max, std::uint64_t seed) {
  check_points(points);
  if (k_min < 1 || k_min > k_max || k_max > points.size()) {
    throw Error(Errc::invalid_argument, "x-means requires 1 <= k_min <= k_max <= number of points");
  }
  ClusterResult current = kmeans(points, k_min, seed);
  for (std::size_t round = 0; current.k < k_max; ++round) {
    struct Split {
      double gain;
      std::size_t cluster;
      std::vector<Point> children;
    };
    std::vector<Split> splits;
    for (std::size_t c = 0; c < current.k; ++c) {
      std::vector<Point> members;
      for (std::size_t i = 0; i < points.size(); ++i) {
        if (current.labels[i] == c) members.push_back(points[i]);
      }
      if (members.size() < 3) continue;
      const std::vector<std::size_t> one(members.size(), 0);
      const std::vector<Point> parent{current.centroids[c]};
      const double parent_bic = spherical_bic(members, one, parent);
      const std::uint64_t child_seed = seed * 1000003ULL + round * 7919ULL + c + 1;
      ClusterResult child = kmeans(members, 2, child_seed);
      if (child.k != 2) continue;
      const auto in_first = static_cast<std::size_t>(std::count(child.labels.begin(), child.labels.end(), 0));
      if (in_first < 2 || members.size() - in_first < 2) continue;
      const double child_bic = spherical_bic(members, child.labels, child.centroids);
      if (child_bic > parent_bic) splits.push_back({child_bic - parent_bic, c, std::move(child.centroids)});
    }
    if (splits.empty()) break;
    std::stable_sort(splits.begin(), splits.end(), [](const Split& a, const Split& b) { return a.gain > b.gain; });
    std::size_t budget = k_max - current.k;
    std::vector<bool> replaced(current.k, false);
    std::vector<Point> centroids;
    for (const auto& s : splits) {
      if (budget == 0) break;
      replaced[s.cluster] = true;
      centroids.push_back(s.children[0]);
      centroids.push_back(s.children[1]);
      --budget;
    }
    for (std::size_t c = 0; c < current.k; ++c) {
      if (!replaced[c]) centroids.push_back(current.centroids[c]);
    }
    ClusterResult next = lloyd(points, std::move(centroids));
    if (next.k <= current.k) break;
    current = std::move(next);
  }
  current.quality = spherical_bic(points, current.labels, current.centroids);
  return current;
}

namespace {

double log_sum_exp(const std::vector<double>& v) {
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace

EmResult em_cluster(std::span<const Point> points, std::size_t k, std::uint64_t seed) {
  check_points(points);
  if (k == 0 || k > points.size()) throw Error(Errc::invalid_argument, "EM requires 1 <= k <= number of points");
  const std::size_t n = points.size();
  const std::size_t dim = points.front().size();

  EmResult r;
  ClusterResult init = kmeans(points, k, seed);
  std::size_t comps = init.k;
  std::vector<Point> means = init.centroids;
  std::vector<Point> vars(comps, Point(dim, 0.0));
  std::vector<double> weights(comps, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = init.labels[i];
    weights[c] += 1.0;
    for (std::size_t d = 0; d < dim; ++d) {
      const double t = points[i][d] - means[c][d];
      vars[c][d] += t * t;
    }
  }
  for (std::size_t c = 0; c < comps; ++c) {
    for (auto& v : vars[c]) {
      v /= weights[c];
      if (v < kEmVarianceFloor) {
        v = kEmVarianceFloor;
        r.variance_floor_hit = true;
      }
    }
    weights[c] /= static_cast<double>(n);
  }

  std::vector<std::vector<double>> resp(n, std::vector<double>(comps, 0.0));
  auto e_step = [&] {
    double ll = 0.0;
    std::vector<double> lp(comps);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < comps; ++c) {
        if (weights[c] <= 0.0) {
          lp[c] = -std::numeric_limits<double>::infinity();
          continue;
        }
        double v = std::log(weights[c]);
        for (std::size_t d = 0; d < dim; ++d) {
          const double t = points[i][d] - means[c][d];
          v -= 0.5 * std::log(2.0 * std::numbers::pi * vars[c][d]) + t * t / (2.0 * vars[c][d]);
        }
        lp[c] = v;
      }
      const double norm = log_sum_exp(lp);
      ll += norm;
      for (std::size_t c = 0; c < comps; ++c) resp[i][c] = std::exp(lp[c] - norm);
    }
    return ll;
  };

  double ll = e_step();
  r.log_likelihood_history.push_back(ll);
  for (std::size_t it = 0; it < 200; ++it) {
    r.iterations = it + 1;
    // M-step. The variance floor is a box constraint, so clamping keeps the
    // update a constrained maximiser and the likelihood non-decreasing.
    for (std::size_t c = 0; c < comps; ++c) {
      double nk = 0.0;
      for (std::size_t i = 0; i < n; ++i) nk += resp[i][c];
      weights[c] = nk / static_cast<double>(n);
      if (nk <= std::numeric_limits<double>::min()) continue;
      for (std::size_t d = 0; d < dim; ++d) {
        double m = 0.0;
        for (std::size_t i = 0; i < n; ++i) m += resp[i][c] * points[i][d];
        m /= nk;
        double v = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double t = points[i][d] - m;
          v += resp[i][c] * t * t;
        }
        v /= nk;
        if (v < kEmVarianceFloor) {
          v = kEmVarianceFloor;
          r.variance_floor_hit = true;
        }
        means[c][d] = m;
        vars[c][d] = v;
      }
    }
    const double next = e_step();
    r.log_likelihood_history.push_back(next);
    const double gain = next - ll;
    ll = next;
    if (gain < 1e-8) break;
  }

  r.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    r.labels[i] = static_cast<std::size_t>(std::max_element(resp[i].begin(), resp[i].end()) - resp[i].begin());
  }
  // Renumber by first appearance and drop components that own no point.
  std::vector<std::size_t> remap(comps, std::numeric_limits<std::size_t>::max());
  std::size_t next_id = 0;
  for (auto& label : r.labels) {
    if (remap[label] == std::numeric_limits<std::size_t>::max()) remap[label] = next_id++;
    label = remap[label];
  }
  r.k = next_id;
  r.centroids.assign(r.k, {});
  r.variances.assign(r.k, {});
  r.weights.assign(r.k, 0.0);
  for (std::size_t c = 0; c < comps; ++c) {
    if (remap[c] == std::numeric_limits<std::size_t>::max()) continue;
    r.centroids[remap[c]] = means[c];
    r.variances[remap[c]] = vars[c];
    r.weights[remap[c]] = weights[c];
  }
  r.responsibilities.assign(n, std::vector<double>(r.k, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < comps; ++c) {
      if (remap[c] != std::numeric_limits<std::size_t>::max()) r.responsibilities[i][remap[c]] = resp[i][c];
    }
  }
  r.quality = ll;
  r.inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i) r.inertia += squared_distance(points[i], r.centroids[r.labels[i]]);
  return r;
}

namespace {

void zscore(std::vector<Point>& points) {
  const std::size_t dim = points.front().size();
  const double n = static_cast<double>(points.size());
  for (std::size_t d = 0; d < dim; ++d) {
    double mean = 0.0;
    for (const auto& p : points) mean += p[d];
    mean /= n;
    double var = 0.0;
    for (const auto& p : points) var += (p[d] - mean) * (p[d] - mean);
    const double sd = std::sqrt(var / n);
    for (auto& p : points) p[d] = sd > 0.0 ? (p[d] - mean) / sd : 0.0;
  }
}

}  // namespace

Partition partition_corpus(const std::vector<StudentLog>& logs, const AssignmentConfig& config,
                           ClusterMethod method, FeatureFunction feature, const PartitionParams& params) {
  if (logs.empty()) throw Error(Errc::empty_input, "cannot partition an empty corpus");
  Partition out;
  out.model.method = method;
  out.model.feature = feature;

  std::vector<std::size_t> labels(logs.size(), 0);
  if (method == ClusterMethod::kNone) {
    out.model.k = 1;
    out.model.quality = 0.0;
  } else {
    std::vector<Point> points;
    points.reserve(logs.size());
    for (const auto& log : logs) points.push_back(feature_vector(log, config, feature));
    if (params.normalize) zscore(points);
    ClusterResult result;
    if (method == ClusterMethod::kXMeans) {
      result = xmeans(points, params.k_min, std::min(params.k_max, points.size()), params.seed);
    } else {
      EmResult em = em_cluster(points, params.k, params.seed);
      out.model.variance_floor_hit = em.variance_floor_hit;
      result = std::move(em);
    }
    labels = result.labels;
    out.model.k = result.k;
    out.model.centroids = result.centroids;
    out.model.quality = result.quality;
  }

  out.members.assign(out.model.k, {});
  for (std::size_t i = 0; i < logs.size(); ++i) {
    out.model.assignments[logs[i].student_id] = labels[i];
    out.members[labels[i]].push_back(logs[i]);
  }
  for (std::size_t c = 0; c < out.model.k; ++c) {
    out.automata.push_back(build_automaton(out.members[c], config, static_cast<int>(c)));
  }
  return out;
}

json cluster_model_to_json(const ClusterModel& m) {
  return {{"method", to_string(m.method)},
          {"feature", to_string(m.feature)},
          {"k", m.k},
          {"assignments", m.assignments},
          {"centroids", m.centroids},
          {"quality", m.quality},
          {"variance_floor_hit", m.variance_floor_hit}};
}

ClusterModel cluster_model_from_json(const json& doc) {
  try {
    ClusterModel m;
    m.method = parse_cluster_method(doc.at("method").get<std::string>());
    m.feature = parse_feature_function(doc.at("feature").get<std::string>());
    m.k = doc.at("k").get<std::size_t>();
    m.assignments = doc.at("assignments").get<std::map<std::string, std::size_t>>();
    m.centroids = doc.at("centroids").get<std::vector<Point>>();
    m.quality = doc.at("quality").get<double>();
    m.variance_floor_hit = doc.value("variance_floor_hit", false);
    return m;
  } catch (const json::exception& e) {
    throw Error(Errc::parse, std::string("malformed cluster model: ") + e.what());
  }
}

}  // namespace csm
