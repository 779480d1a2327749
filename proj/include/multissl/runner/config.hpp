#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "multissl/combine/strategy.hpp"
#include "multissl/downstream/harness.hpp"
#include "multissl/scenegen/scene.hpp"

namespace multissl::runner {

/// Everything a run depends on. The key tree mirrors configs/defaults.json.
struct RunConfig {
  uint64_t seed = 0;
  /// Seed of the synthetic dataset, independent of the training seed.
  uint64_t data_seed = 0;
  /// Empty: derived from the command, strategy, tasks, seed and config hash.
  std::string run_id;
  /// Empty: <root>/data/<dataset hash>-s<data_seed>.
  std::string dataset_path;
  scenegen::SceneGenConfig dataset;
  ssl::InputSpec input;
  combine::EncoderSet encoders;
  ssl::TaskHyper tasks;
  combine::TrainConfig train;
  combine::CombinerConfig combiner;
  downstream::DownstreamConfig downstream;

  void validate() const;
};

/// Built-in defaults (configs/defaults.json compiled into the library).
const nlohmann::json& default_config_json();

/// Overlays `patch` on `base`. Every key in the patch must exist in the base
/// with a compatible type; objects merge recursively, everything else is
/// replaced. Errors name the key path and, when `source` is given, the line
/// of the offending key in that text.
void overlay_checked(nlohmann::json& base, const nlohmann::json& patch, const std::string& source = {},
                     const std::string& source_name = {});

/// Parses a config file (JSON) over the defaults.
nlohmann::json load_config_json(const std::filesystem::path& path);
nlohmann::json parse_config_text(const std::string& text, const std::string& source_name);

RunConfig config_from_json(const nlohmann::json& merged);
nlohmann::json config_to_json(const RunConfig& c);

/// 16 hex digits over the canonical JSON of everything except run_id.
std::string config_hash(const RunConfig& c);

}  // namespace multissl::runner
