#pragma once

// Student feature functions and the clusterers that partition a corpus into
// groups, each of which gets its own automaton.

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "csm/automaton.hpp"
#include "csm/domain.hpp"

namespace csm {

using Point = std::vector<double>;

enum class ClusterMethod { kNone, kXMeans, kEm };
enum class FeatureFunction { kErrors, kErrorsTime, kZoneEvents };

std::string_view to_string(ClusterMethod method);
std::string_view to_string(FeatureFunction feature);
// "none" | "xmeans" | "em"
ClusterMethod parse_cluster_method(std::string_view text);
// "errors" | "errors-time" | "zone-events"
FeatureFunction parse_feature_function(std::string_view text);

// Weighted error count: each FAIL contributes the weight of its blamed action
// (or of the validated action when the blamed code is not a configured action).
double feature_error_coeff(const StudentLog& log, const AssignmentConfig& config);
// (error coefficient, seconds from start to finish). Throws on a non-positive duration.
std::pair<double, double> feature_error_time(const StudentLog& log, const AssignmentConfig& config);
// Events landing in the correct / irrelevant / relevant zone.
std::array<std::size_t, 3> feature_zone_events(const StudentLog& log, const AssignmentConfig& config);
Point feature_vector(const StudentLog& log, const AssignmentConfig& config, FeatureFunction feature);

struct ClusterResult {
  std::vector<std::size_t> labels;  // cluster per point; clusters are numbered by first appearance
  std::vector<Point> centroids;
  std::size_t k = 0;
  double quality = 0.0;  // BIC for x-means, log-likelihood for EM
  double inertia = 0.0;  // sum of squared distances to the assigned centroid
  std::size_t iterations = 0;
};

// k-means++ seeding followed by Lloyd iterations (centroid shift < 1e-6 or
// 100 iterations).
ClusterResult kmeans(std::span<const Point> points, std::size_t k, std::uint64_t seed);
// Lloyd iterations from the given centroids. Clusters that end up empty are dropped.
ClusterResult lloyd(std::span<const Point> points, std::vector<Point> centroids);

// Spherical-Gaussian BIC of a hard partition (log-likelihood minus
// p/2 ln R with p = (K-1) + K*M + 1).
double spherical_bic(std::span<const Point> points, std::span<const std::size_t> labels,
                     std::span<const Point> centroids);

// Starts from k_min clusters and splits a centroid in two whenever the local
// BIC improves, up to k_max clusters. quality is the global BIC.
ClusterResult xmeans(std::span<const Point> points, std::size_t k_min, std::size_t k_max, std::uint64_t seed);

struct EmResult : ClusterResult {
  std::vector<Point> variances;  // diagonal covariance per component
  std::vector<double> weights;
  std::vector<double> log_likelihood_history;
  std::vector<std::vector<double>> responsibilities;  // per point, per final cluster
  bool variance_floor_hit = false;
};

inline constexpr double kEmVarianceFloor = 1e-6;

// Diagonal Gaussian mixture fitted by EM, initialised from seeded k-means.
// Stops when the log-likelihood gain falls below 1e-8 or after 200 iterations.
EmResult em_cluster(std::span<const Point> points, std::size_t k, std::uint64_t seed);

struct ClusterModel {
  ClusterMethod method = ClusterMethod::kNone;
  FeatureFunction feature = FeatureFunction::kZoneEvents;
  std::size_t k = 1;
  std::map<std::string, std::size_t> assignments;
  std::vector<Point> centroids;
  double quality = 0.0;
  bool variance_floor_hit = false;
};

struct PartitionParams {
  std::size_t k_min = 1;
  std::size_t k_max = 8;
  std::size_t k = 2;
  std::uint64_t seed = 0;
  bool normalize = false;  // z-score each feature dimension before clustering
};

struct Partition {
  ClusterModel model;
  std::vector<std::vector<StudentLog>> members;  // per cluster, corpus order
  std::vector<Automaton> automata;               // per cluster
};

Partition partition_corpus(const std::vector<StudentLog>& logs, const AssignmentConfig& config,
                           ClusterMethod method, FeatureFunction feature, const PartitionParams& params);

nlohmann::json cluster_model_to_json(const ClusterModel& model);
ClusterModel cluster_model_from_json(const nlohmann::json& doc);

}  // namespace csm
