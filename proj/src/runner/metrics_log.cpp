#include "multissl/runner/metrics_log.hpp"

#include <nlohmann/json.hpp>

#include "multissl/core/error.hpp"

namespace multissl::runner {

namespace fs = std::filesystem;

MetricsLog::MetricsLog(fs::path path, std::string run_id) : path_(std::move(path)), run_id_(std::move(run_id)) {
  if (fs::exists(path_)) ts_ = static_cast<int64_t>(read_metrics(path_).size());
  out_.open(path_, std::ios::app);
  if (!out_) throw IoError("cannot open metrics log " + path_.string());
}

void MetricsLog::write(const MetricRow& row) {
  nlohmann::ordered_json j;
  j["ts"] = ts_++;
  j["run_id"] = run_id_;
  j["phase"] = row.phase;
  j["task"] = row.task;
  j["step"] = row.step;
  j["metric"] = row.metric;
  j["value"] = row.value;
  out_ << j.dump() << '\n';
  out_.flush();
  if (!out_) throw IoError("failed writing metrics log " + path_.string());
}

MetricSink MetricsLog::sink() {
  return [this](const MetricRow& row) { write(row); };
}

std::vector<LoggedRow> read_metrics(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read metrics log " + path.string());
  std::vector<LoggedRow> out;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      LoggedRow r;
      j.at("ts").get_to(r.ts);
      j.at("run_id").get_to(r.run_id);
      j.at("phase").get_to(r.row.phase);
      j.at("task").get_to(r.row.task);
      j.at("step").get_to(r.row.step);
      j.at("metric").get_to(r.row.metric);
      j.at("value").get_to(r.row.value);
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw IoError(path.string() + ":" + std::to_string(n) + ": bad metrics line (" + e.what() + ")");
    }
  }
  return out;
}

}  // namespace multissl::runner
