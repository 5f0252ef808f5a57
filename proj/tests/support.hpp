#pragma once

// Shared helpers for the unit tests.

#include <filesystem>
#include <atomic>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "csm/domain.hpp"
#include "csm/replay.hpp"

namespace csm::test {

inline std::filesystem::path data_dir() { return CSM_DATA_DIR; }

// The six-action example: 1..6 in order, plus a wrong action AC that is
// incompatible with 3.
inline AssignmentConfig six_action_config() {
  AssignmentConfig c;
  c.assignment_id = "six";
  c.phases = {"p1"};
  for (int i = 1; i <= 6; ++i) {
    c.correct_flow.push_back(std::to_string(i));
    ActionSpec a;
    a.code = std::to_string(i);
    a.phase = "p1";
    c.actions.push_back(a);
  }
  ActionSpec ac;
  ac.code = "AC";
  ac.phase = "p1";
  c.actions.push_back(ac);
  c.actions[2].incompatibilities = {"AC"};
  c.reindex();
  return c;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

// Fresh directory under the system temp dir, removed on scope exit.
struct TempDir {
  std::filesystem::path path;

  TempDir() {
    static std::atomic<int> counter{0};
    path = std::filesystem::temp_directory_path() /
           ("csm-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
};

inline Timestamp t0() { return parse_timestamp("2015-03-02T10:00:00Z"); }

// Raw actions one minute apart.
inline std::vector<RawAction> script(const std::string& student, const std::vector<std::string>& codes) {
  std::vector<RawAction> out;
  for (std::size_t i = 0; i < codes.size(); ++i) {
    out.push_back({student, t0() + std::chrono::minutes{static_cast<long>(i)}, codes[i], std::nullopt});
  }
  return out;
}

inline StudentLog replayed(const std::string& student, const std::vector<std::string>& codes,
                           const AssignmentConfig& config) {
  StudentLog log = replay_student(script(student, codes), config);
  log.student_id = student;
  return log;
}

}  // namespace csm::test
