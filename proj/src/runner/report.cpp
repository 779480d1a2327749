#include "multissl/runner/report.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <ostream>
#include <set>
#include <sstream>

#include "multissl/runner/metrics_log.hpp"

namespace multissl::runner {

namespace fs = std::filesystem;

namespace {

struct Column {
  const char* key;
  const char* title;
};

constexpr Column kEvalColumns[] = {
    {"retrieval/top1", "retrieval top-1 (higher)"},
    {"semantic/miou", "semantic mIoU (higher)"},
    {"s3r/mse", "S3R MSE (lower)"},
    {"probe/top1", "probe top-1 (higher)"},
};

std::string cell(const std::map<std::string, double>& m, const std::string& key) {
  auto it = m.find(key);
  if (it == m.end()) return "-";
  std::ostringstream s;
  s << std::fixed << std::setprecision(4) << it->second;
  return s.str();
}

}  // namespace

std::vector<RunRow> collect_runs(const fs::path& root) {
  std::vector<RunRow> rows;
  const fs::path runs = root / "runs";
  if (!fs::is_directory(runs)) return rows;
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(runs)) {
    if (e.is_directory()) dirs.push_back(e.path());
  }
  std::sort(dirs.begin(), dirs.end());
  for (const auto& dir : dirs) {
    RunRow r;
    r.run_id = dir.filename().string();
    std::ifstream cfg(dir / "config.json");
    if (cfg) {
      const auto j = nlohmann::json::parse(cfg, nullptr, false);
      if (!j.is_discarded() && j.contains("combiner")) {
        r.strategy = j["combiner"].value("strategy", "");
        for (const auto& t : j["combiner"].value("tasks", nlohmann::json::array())) {
          r.tasks += (r.tasks.empty() ? "" : "+") + t.get<std::string>().substr(0, 1);
        }
        r.seed = std::to_string(j.value("seed", uint64_t{0}));
      }
    }
    if (fs::exists(dir / "metrics.jsonl")) {
      for (const auto& m : read_metrics(dir / "metrics.jsonl")) {
        const std::string key = m.row.task + "/" + m.row.metric;
        if (m.row.phase == "eval") r.eval[key] = m.row.value;
        if (m.row.phase == "val") r.val[key] = m.row.value;
      }
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

void render_report(const std::vector<RunRow>& rows, std::ostream& out) {
  out << "| run | strategy | tasks | seed |";
  for (const auto& c : kEvalColumns) out << " " << c.title << " |";
  out << "\n|---|---|---|---|";
  for (size_t i = 0; i < std::size(kEvalColumns); ++i) out << "---|";
  out << "\n";
  for (const auto& r : rows) {
    out << "| " << r.run_id << " | " << r.strategy << " | " << r.tasks << " | " << r.seed << " |";
    for (const auto& c : kEvalColumns) out << " " << cell(r.eval, c.key) << " |";
    out << "\n";
  }

  std::set<std::string> val_keys;
  for (const auto& r : rows) {
    for (const auto& [k, v] : r.val) val_keys.insert(k);
  }
  if (val_keys.empty()) return;
  out << "\n| run |";
  for (const auto& k : val_keys) out << " " << k << " |";
  out << "\n|---|";
  for (size_t i = 0; i < val_keys.size(); ++i) out << "---|";
  out << "\n";
  for (const auto& r : rows) {
    out << "| " << r.run_id << " |";
    for (const auto& k : val_keys) out << " " << cell(r.val, k) << " |";
    out << "\n";
  }
}

}  // namespace multissl::runner
