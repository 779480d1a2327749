#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "multissl/core/metrics.hpp"

namespace multissl::runner {

/// Append-only metrics.jsonl writer. Each line is
/// {"ts", "run_id", "phase", "task", "step", "metric", "value"} in that key
/// order; ts is a per-file sequence number so reruns are byte-identical.
class MetricsLog {
 public:
  /// Continues numbering after any lines already in the file.
  MetricsLog(std::filesystem::path path, std::string run_id);

  void write(const MetricRow& row);
  MetricSink sink();
  int64_t next_ts() const { return ts_; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::string run_id_;
  std::ofstream out_;
  int64_t ts_ = 0;
};

struct LoggedRow {
  int64_t ts = 0;
  std::string run_id;
  MetricRow row;
};

std::vector<LoggedRow> read_metrics(const std::filesystem::path& path);

}  // namespace multissl::runner
