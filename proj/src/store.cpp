#include "csm/store.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "csm/replay.hpp"

namespace csm {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string content_id(std::string_view data) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::uint64_t h = fnv1a64(data);
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kHex[h & 0xf];
    h >>= 4;
  }
  return out;
}

void write_file_atomic(const fs::path& path, std::string_view content) {
  static std::atomic<unsigned> counter{0};
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  if (ec) throw Error(Errc::io, "cannot create '" + path.parent_path().string() + "': " + ec.message());
  fs::path tmp = path;
  tmp += ".tmp-" + std::to_string(::getpid()) + "-" + std::to_string(counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io, "cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      fs::remove(tmp, ec);
      throw Error(Errc::io, "short write to '" + tmp.string() + "'");
    }
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(Errc::io, "cannot rename into '" + path.string() + "'");
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

json parse_doc(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error(Errc::parse, path.string() + ": " + e.what());
  }
}

// Ids are content hashes; anything else cannot name a stored artifact.
bool plausible_id(const std::string& id) {
  if (id.size() != 16) return false;
  for (char c : id) {
    if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return false;
  }
  return true;
}

CorpusMeta corpus_meta_from_json(const json& j) {
  CorpusMeta m;
  m.corpus_id = j.at("corpus_id").get<std::string>();
  m.assignment_id = j.at("assignment_id").get<std::string>();
  m.n_students = j.at("n_students").get<std::size_t>();
  m.n_events = j.at("n_events").get<std::size_t>();
  m.has_changes = j.value("has_changes", false);
  return m;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace

json BuildOptions::to_json() const {
  return {{"method", to_string(method)},
          {"feature", to_string(feature)},
          {"k_min", params.k_min},
          {"k_max", params.k_max},
          {"k", params.k},
          {"seed", params.seed},
          {"normalize", params.normalize}};
}

json model_meta_to_json(const ModelMeta& meta) {
  json clusters = json::array();
  for (const auto& c : meta.clusters) {
    clusters.push_back({{"cluster_id", c.cluster_id},
                        {"n_students", c.n_students},
                        {"n_states", c.n_states},
                        {"n_edges", c.n_edges}});
  }
  return {{"model_id", meta.model_id},
          {"corpus_id", meta.corpus_id},
          {"assignment_id", meta.assignment_id},
          {"options", meta.options.to_json()},
          {"clustering", cluster_model_to_json(meta.clustering)},
          {"clusters", clusters}};
}

ModelMeta model_meta_from_json(const json& doc) {
  ModelMeta m;
  m.model_id = doc.at("model_id").get<std::string>();
  m.corpus_id = doc.at("corpus_id").get<std::string>();
  m.assignment_id = doc.at("assignment_id").get<std::string>();
  const json& o = doc.at("options");
  m.options.method = parse_cluster_method(o.at("method").get<std::string>());
  m.options.feature = parse_feature_function(o.at("feature").get<std::string>());
  m.options.params.k_min = o.at("k_min").get<std::size_t>();
  m.options.params.k_max = o.at("k_max").get<std::size_t>();
  m.options.params.k = o.at("k").get<std::size_t>();
  m.options.params.seed = o.at("seed").get<std::uint64_t>();
  m.options.params.normalize = o.at("normalize").get<bool>();
  m.clustering = cluster_model_from_json(doc.at("clustering"));
  for (const auto& c : doc.at("clusters")) {
    m.clusters.push_back({c.at("cluster_id").get<std::size_t>(), c.at("n_students").get<std::size_t>(),
                          c.at("n_states").get<std::size_t>(), c.at("n_edges").get<std::size_t>()});
  }
  return m;
}

Store::Store(fs::path root) : root_(std::move(root)) {}

Store Store::open(const std::optional<fs::path>& root) {
  if (root) return Store(*root);
  if (const char* env = std::getenv(kStoreEnv); env && *env) return Store(env);
  return Store("csm-store");
}

fs::path Store::corpus_dir(const std::string& id) const {
  if (!plausible_id(id)) throw Error(Errc::not_found, "unknown corpus '" + id + "'");
  return root_ / "corpora" / id;
}

fs::path Store::model_dir(const std::string& id) const {
  if (!plausible_id(id)) throw Error(Errc::not_found, "unknown model '" + id + "'");
  return root_ / "models" / id;
}

fs::path Store::cluster_dir(const std::string& model_id, std::size_t cluster) const {
  return model_dir(model_id) / "clusters" / std::to_string(cluster);
}

std::string Store::put_corpus(const AssignmentConfig& config, const std::vector<StudentLog>& logs,
                              const std::optional<ChangeMap>& changes) {
  if (logs.empty()) throw Error(Errc::empty_input, "refusing to store an empty corpus");
  const std::string config_text = dump(config_to_json(config));
  std::ostringstream corpus;
  write_corpus(corpus, logs);
  const std::string corpus_text = corpus.str();
  std::string change_text;
  if (changes) change_text = dump(json(*changes));
  const std::string id = content_id(config_text + '\x1f' + corpus_text + '\x1f' + change_text);

  const fs::path dir = corpus_dir(id);
  write_file_atomic(dir / "config.json", config_text);
  write_file_atomic(dir / "corpus.jsonl", corpus_text);
  if (changes) write_file_atomic(dir / "changes.json", change_text);
  std::size_t n_events = 0;
  for (const auto& log : logs) n_events += log.events.size();
  write_file_atomic(dir / "meta.json", dump({{"corpus_id", id},
                                             {"assignment_id", config.assignment_id},
                                             {"n_students", logs.size()},
                                             {"n_events", n_events},
                                             {"has_changes", changes.has_value()}}));
  return id;
}

std::vector<CorpusMeta> Store::list_corpora() const {
  std::vector<CorpusMeta> out;
  std::error_code ec;
  const fs::path dir = root_ / "corpora";
  if (!fs::is_directory(dir, ec)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (fs::exists(entry.path() / "meta.json", ec)) out.push_back(corpus_meta_from_json(parse_doc(entry.path() / "meta.json")));
  }
  std::sort(out.begin(), out.end(), [](const CorpusMeta& a, const CorpusMeta& b) { return a.corpus_id < b.corpus_id; });
  return out;
}

CorpusMeta Store::corpus_meta(const std::string& corpus_id) const {
  const fs::path meta = corpus_dir(corpus_id) / "meta.json";
  std::error_code ec;
  if (!fs::exists(meta, ec)) throw Error(Errc::not_found, "unknown corpus '" + corpus_id + "'");
  return corpus_meta_from_json(parse_doc(meta));
}

AssignmentConfig Store::load_config(const std::string& corpus_id) const {
  corpus_meta(corpus_id);
  return config_from_json(parse_doc(corpus_dir(corpus_id) / "config.json"));
}

std::vector<StudentLog> Store::load_logs(const std::string& corpus_id) const {
  corpus_meta(corpus_id);
  const fs::path file = corpus_dir(corpus_id) / "corpus.jsonl";
  std::ifstream in(file);
  if (!in) throw Error(Errc::io, "cannot read '" + file.string() + "'");
  Corpus c = parse_corpus(in, file.string());
  if (!c.diagnostics.empty()) {
    throw Error(Errc::parse, "stored corpus '" + corpus_id + "' is damaged: " + c.diagnostics.front().message);
  }
  return std::move(c.logs);
}

ChangeMap Store::load_changes(const std::string& corpus_id) const {
  if (!corpus_meta(corpus_id).has_changes) return {};
  return change_map_from_json(parse_doc(corpus_dir(corpus_id) / "changes.json"));
}

std::string Store::build_model(const std::string& corpus_id, const BuildOptions& options) {
  const CorpusMeta cmeta = corpus_meta(corpus_id);
  const AssignmentConfig config = load_config(corpus_id);
  const std::vector<StudentLog> logs = load_logs(corpus_id);
  Partition part = partition_corpus(logs, config, options.method, options.feature, options.params);

  ModelMeta meta;
  meta.corpus_id = corpus_id;
  meta.assignment_id = cmeta.assignment_id;
  meta.options = options;
  meta.clustering = part.model;
  meta.model_id = content_id(corpus_id + '\x1f' + options.to_json().dump());

  for (std::size_t c = 0; c < part.automata.size(); ++c) {
    const Automaton grouped = group_super_states(part.automata[c]);
    const LayoutGraph layout = compute_layout(grouped);
    const fs::path dir = cluster_dir(meta.model_id, c);
    write_file_atomic(dir / "automaton.json", dump(automaton_to_json(grouped)));
    write_file_atomic(dir / "layout.json", dump(layout_to_json(layout)));
    meta.clusters.push_back({c, grouped.n_students, grouped.states.size(), grouped.edges.size()});
  }
  write_file_atomic(model_dir(meta.model_id) / "model.json", dump(model_meta_to_json(meta)));
  return meta.model_id;
}

std::vector<ModelMeta> Store::list_models() const {
  std::vector<ModelMeta> out;
  std::error_code ec;
  const fs::path dir = root_ / "models";
  if (!fs::is_directory(dir, ec)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (fs::exists(entry.path() / "model.json", ec)) out.push_back(model_meta_from_json(parse_doc(entry.path() / "model.json")));
  }
  std::sort(out.begin(), out.end(), [](const ModelMeta& a, const ModelMeta& b) { return a.model_id < b.model_id; });
  return out;
}

ModelMeta Store::model_meta(const std::string& model_id) const {
  const fs::path file = model_dir(model_id) / "model.json";
  std::error_code ec;
  if (!fs::exists(file, ec)) throw Error(Errc::not_found, "unknown model '" + model_id + "'");
  return model_meta_from_json(parse_doc(file));
}

Automaton Store::load_automaton(const std::string& model_id, std::size_t cluster) const {
  const ModelMeta meta = model_meta(model_id);
  if (cluster >= meta.clusters.size()) {
    throw Error(Errc::not_found, "model '" + model_id + "' has no cluster " + std::to_string(cluster));
  }
  return automaton_from_json(parse_doc(cluster_dir(model_id, cluster) / "automaton.json"));
}

LayoutGraph Store::load_layout(const std::string& model_id, std::size_t cluster) const {
  const ModelMeta meta = model_meta(model_id);
  if (cluster >= meta.clusters.size()) {
    throw Error(Errc::not_found, "model '" + model_id + "' has no cluster " + std::to_string(cluster));
  }
  return layout_from_json(parse_doc(cluster_dir(model_id, cluster) / "layout.json"));
}

std::vector<StudentLog> Store::cluster_logs(const std::string& model_id, std::size_t cluster) const {
  const ModelMeta meta = model_meta(model_id);
  if (cluster >= meta.clusters.size()) {
    throw Error(Errc::not_found, "model '" + model_id + "' has no cluster " + std::to_string(cluster));
  }
  std::vector<StudentLog> out;
  for (auto& log : load_logs(meta.corpus_id)) {
    auto it = meta.clustering.assignments.find(log.student_id);
    const std::size_t c = it == meta.clustering.assignments.end() ? 0 : it->second;
    if (c == cluster) out.push_back(std::move(log));
  }
  return out;
}

}  // namespace csm
