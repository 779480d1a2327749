#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>

#include "multissl/runner/checkpoint.hpp"
#include "multissl/runner/config.hpp"
#include "multissl/runner/metrics_log.hpp"

namespace multissl::runner {

/// "<command>-<strategy>-<task letters>-s<seed>-<first 8 hash digits>"
std::string derive_run_id(const std::string& command, const RunConfig& c);

std::filesystem::path dataset_dir(const RunConfig& c, const std::filesystem::path& root);
/// Loads the run's dataset, generating it first when absent.
scenegen::Dataset prepare_dataset(const RunConfig& c, const std::filesystem::path& root);

struct RunRequest {
  /// "pretrain" or "combine"; only used to derive the run id.
  std::string command = "combine";
  bool force = false;
  bool evaluate = false;
};

struct RunSummary {
  std::string run_id;
  std::filesystem::path dir;
  std::string config_hash;
  std::string checkpoint_hash;
};

/// Trains the configured strategy into a fresh run directory: config.json,
/// metrics.jsonl, checkpoint.bin and, where the strategy has them,
/// responses.* or features.*. Records start and end events in the ledger.
RunSummary train_run(const RunConfig& c, const std::filesystem::path& root, const RunRequest& request,
                     std::ostream& log);

/// Runs the configured downstream harnesses on a trunk and appends their
/// results to the metrics log (phase "eval") and the reports file.
void evaluate_trunk(const nn::Trunk& trunk, const scenegen::Dataset& data, const RunConfig& c,
                    const downstream::Provenance& provenance, MetricsLog& metrics,
                    const std::filesystem::path& reports, std::ostream& log);

/// Evaluates the checkpoint of an existing run.
void evaluate_run(const std::filesystem::path& root, const std::string& run_id, bool force, std::ostream& log);

}  // namespace multissl::runner
