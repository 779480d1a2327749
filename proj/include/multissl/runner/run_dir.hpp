#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace multissl::runner {

/// $MULTISSL_ROOT when set, otherwise ./multissl_artifacts.
std::filesystem::path artifact_root();

/// Exclusive advisory lock on a file, released on destruction or process exit.
class FileLock {
 public:
  explicit FileLock(const std::filesystem::path& path);
  ~FileLock();
  FileLock(FileLock&& o) noexcept : fd_(o.fd_) { o.fd_ = -1; }
  FileLock(const FileLock&) = delete;
  FileLock& operator=(const FileLock&) = delete;
  FileLock& operator=(FileLock&&) = delete;

 private:
  int fd_ = -1;
};

/// <root>/runs/<run_id>, owned exclusively through <root>/locks/<run_id>.lock.
class RunDir {
 public:
  /// Refuses an existing run directory unless force, which clears it.
  static RunDir create(const std::filesystem::path& root, const std::string& run_id, bool force);
  static RunDir open(const std::filesystem::path& root, const std::string& run_id);

  const std::string& run_id() const { return run_id_; }
  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path config() const { return dir_ / "config.json"; }
  std::filesystem::path metrics() const { return dir_ / "metrics.jsonl"; }
  std::filesystem::path reports() const { return dir_ / "reports.jsonl"; }
  std::filesystem::path checkpoint() const { return dir_ / "checkpoint.bin"; }
  std::filesystem::path store_stem() const { return dir_ / "responses"; }
  std::filesystem::path bank_stem() const { return dir_ / "features"; }

 private:
  RunDir(std::string run_id, std::filesystem::path dir, FileLock lock)
      : run_id_(std::move(run_id)), dir_(std::move(dir)), lock_(std::move(lock)) {}

  std::string run_id_;
  std::filesystem::path dir_;
  FileLock lock_;
};

/// Appends one event to <root>/ledger.jsonl.
void append_ledger(const std::filesystem::path& root, const nlohmann::json& event);
std::vector<nlohmann::json> read_ledger(const std::filesystem::path& root);

}  // namespace multissl::runner
