#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace multissl::runner {

struct RunRow {
  std::string run_id;
  std::string strategy;
  std::string tasks;
  std::string seed;
  /// "harness/metric" -> last logged value
  std::map<std::string, double> eval;
  /// "task/metric" -> last validation value
  std::map<std::string, double> val;
};

/// Reads every run under <root>/runs. Never writes anything.
std::vector<RunRow> collect_runs(const std::filesystem::path& root);

/// Markdown tables: strategies x downstream harnesses, then pretext
/// validation metrics.
void render_report(const std::vector<RunRow>& rows, std::ostream& out);

}  // namespace multissl::runner
