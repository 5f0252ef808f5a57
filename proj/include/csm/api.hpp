#pragma once

// Read-only HTTP API over a model store. Routing and payloads live in
// Api::get so they can be exercised without sockets; serve() only adapts
// it to an HTTP server.

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>

#include "csm/store.hpp"

namespace csm {

struct HttpResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

using QueryParams = std::map<std::string, std::string>;

// {"error":{"code":...,"message":...}}
std::string error_body(std::string_view code, const std::string& message);
int http_status(Errc code);

// Accepts a full timestamp or a bare date; a bare `to` date covers the whole day.
Timestamp parse_range_bound(const std::string& text, bool end_of_range);

class Api {
 public:
  explicit Api(Store store);

  // `path` is already percent-decoded.
  HttpResponse get(const std::string& path, const QueryParams& query) const;

 private:
  std::shared_ptr<const Automaton> automaton(const std::string& model, std::size_t cluster) const;
  std::shared_ptr<const LayoutGraph> layout(const std::string& model, std::size_t cluster) const;
  std::shared_ptr<const std::vector<StudentLog>> logs(const std::string& corpus) const;
  std::shared_ptr<const AssignmentConfig> config(const std::string& corpus) const;

  std::string route(const std::string& path, const QueryParams& query) const;

  Store store_;
  // The store is immutable once built, so cached documents never go stale.
  mutable std::mutex mu_;
  mutable std::map<std::pair<std::string, std::size_t>, std::shared_ptr<const Automaton>> automata_;
  mutable std::map<std::pair<std::string, std::size_t>, std::shared_ptr<const LayoutGraph>> layouts_;
  mutable std::map<std::string, std::shared_ptr<const std::vector<StudentLog>>> logs_;
  mutable std::map<std::string, std::shared_ptr<const AssignmentConfig>> configs_;
};

class ApiServer {
 public:
  explicit ApiServer(const Api& api);
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  // Port 0 picks a free port. Returns the bound port; throws io on failure.
  int bind(const std::string& host, int port);
  // Serves until stop() is called from another thread.
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace csm
