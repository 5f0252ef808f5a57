#pragma once

// Plain-file artifact store. Every document is written to a temporary file
// and renamed into place, so readers never observe a partial write.
//
//   <root>/corpora/<corpus_id>/{config.json, corpus.jsonl, changes.json, meta.json}
//   <root>/models/<model_id>/model.json
//   <root>/models/<model_id>/clusters/<c>/{automaton.json, layout.json}
//
// meta.json and model.json are written last; a directory without them is
// an unfinished write and is ignored by the listings.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "csm/automaton.hpp"
#include "csm/clustering.hpp"
#include "csm/domain.hpp"
#include "csm/layout.hpp"
#include "csm/views.hpp"

namespace csm {

inline constexpr const char* kStoreEnv = "CSM_STORE";

// 64-bit FNV-1a, rendered as 16 lowercase hex digits.
std::uint64_t fnv1a64(std::string_view data);
std::string content_id(std::string_view data);

void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

struct CorpusMeta {
  std::string corpus_id;
  std::string assignment_id;
  std::size_t n_students = 0;
  std::size_t n_events = 0;
  bool has_changes = false;
};

struct ClusterSummary {
  std::size_t cluster_id = 0;
  std::size_t n_students = 0;
  std::size_t n_states = 0;  // after super-state grouping
  std::size_t n_edges = 0;
};

struct BuildOptions {
  ClusterMethod method = ClusterMethod::kNone;
  FeatureFunction feature = FeatureFunction::kZoneEvents;
  PartitionParams params;

  nlohmann::json to_json() const;
};

struct ModelMeta {
  std::string model_id;
  std::string corpus_id;
  std::string assignment_id;
  BuildOptions options;
  ClusterModel clustering;
  std::vector<ClusterSummary> clusters;
};

nlohmann::json model_meta_to_json(const ModelMeta& meta);
ModelMeta model_meta_from_json(const nlohmann::json& doc);

class Store {
 public:
  explicit Store(std::filesystem::path root);
  // The explicit root when given, else $CSM_STORE, else ./csm-store.
  static Store open(const std::optional<std::filesystem::path>& root = std::nullopt);

  const std::filesystem::path& root() const { return root_; }

  // Content-addressed: the id is a hash of the config and the serialized
  // corpus, so re-ingesting the same data yields the same id.
  std::string put_corpus(const AssignmentConfig& config, const std::vector<StudentLog>& logs,
                         const std::optional<ChangeMap>& changes = std::nullopt);
  std::vector<CorpusMeta> list_corpora() const;
  CorpusMeta corpus_meta(const std::string& corpus_id) const;
  AssignmentConfig load_config(const std::string& corpus_id) const;
  std::vector<StudentLog> load_logs(const std::string& corpus_id) const;
  ChangeMap load_changes(const std::string& corpus_id) const;  // empty when none were stored

  // Partitions the corpus, builds, groups and lays out one automaton per
  // cluster. The id hashes the corpus id and the options.
  std::string build_model(const std::string& corpus_id, const BuildOptions& options);
  std::vector<ModelMeta> list_models() const;
  ModelMeta model_meta(const std::string& model_id) const;
  Automaton load_automaton(const std::string& model_id, std::size_t cluster) const;
  LayoutGraph load_layout(const std::string& model_id, std::size_t cluster) const;
  // Student logs of one cluster of a model, corpus order.
  std::vector<StudentLog> cluster_logs(const std::string& model_id, std::size_t cluster) const;

 private:
  std::filesystem::path corpus_dir(const std::string& id) const;
  std::filesystem::path model_dir(const std::string& id) const;
  std::filesystem::path cluster_dir(const std::string& model_id, std::size_t cluster) const;

  std::filesystem::path root_;
};

}  // namespace csm
