#include "multissl/runner/run_dir.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <fstream>

#include "multissl/core/error.hpp"

namespace multissl::runner {

namespace fs = std::filesystem;

fs::path artifact_root() {
  const char* env = std::getenv("MULTISSL_ROOT");
  return env != nullptr && *env != '\0' ? fs::path(env) : fs::path("multissl_artifacts");
}

FileLock::FileLock(const fs::path& path) {
  fs::create_directories(path.parent_path());
  fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0) throw IoError("cannot open lock file " + path.string() + ": " + std::strerror(errno));
  if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(fd_);
    fd_ = -1;
    throw IoError("another process holds " + path.string());
  }
}

FileLock::~FileLock() {
  if (fd_ >= 0) {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
}

RunDir RunDir::create(const fs::path& root, const std::string& run_id, bool force) {
  if (run_id.empty() || run_id.find('/') != std::string::npos || run_id == "." || run_id == "..") {
    throw ConfigError("invalid run id '" + run_id + "'");
  }
  FileLock lock(root / "locks" / (run_id + ".lock"));
  const fs::path dir = root / "runs" / run_id;
  if (fs::exists(dir)) {
    if (!force) {
      throw IoError("run directory " + dir.string() + " already exists (pass --force to replace it)");
    }
    fs::remove_all(dir);
  }
  fs::create_directories(dir);
  return RunDir(run_id, dir, std::move(lock));
}

RunDir RunDir::open(const fs::path& root, const std::string& run_id) {
  FileLock lock(root / "locks" / (run_id + ".lock"));
  const fs::path dir = root / "runs" / run_id;
  if (!fs::is_directory(dir)) throw IoError("no run named '" + run_id + "' under " + root.string());
  return RunDir(run_id, dir, std::move(lock));
}

void append_ledger(const fs::path& root, const nlohmann::json& event) {
  fs::create_directories(root);
  FileLock lock(root / "locks" / "ledger.lock");
  std::ofstream out(root / "ledger.jsonl", std::ios::app);
  if (!out) throw IoError("cannot append to the run ledger under " + root.string());
  out << event.dump() << '\n';
}

std::vector<nlohmann::json> read_ledger(const fs::path& root) {
  std::vector<nlohmann::json> out;
  std::ifstream in(root / "ledger.jsonl");
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(nlohmann::json::parse(line));
  }
  return out;
}

}  // namespace multissl::runner
