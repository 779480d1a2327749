#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "multissl/scenegen/scene.hpp"

namespace multissl::scenegen {

enum class Split { kTrain, kVal, kTest };
const char* split_name(Split s);

inline constexpr int kDatasetFormatVersion = 1;

struct DatasetManifest {
  std::filesystem::path root;
  std::string config_hash;
  uint64_t seed = 0;
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;

  const std::vector<std::string>& ids(Split s) const;
};

struct Dataset {
  DatasetManifest manifest;
  SceneGenConfig config;
  std::vector<AVSample> train;
  std::vector<AVSample> val;
  std::vector<AVSample> test;

  const std::vector<AVSample>& split(Split s) const;
  bool has_s3r_targets() const;
};

/// Writes root/<split>/<sample_id>/{frames.grid, audio.wav, audio_rot_p90.wav,
/// audio_rot_m90.wav, labels.grid, scene.json} and root/manifest.json.
/// Deterministic in (config, seed); each sample draws from its own stream.
DatasetManifest generate_dataset(const std::filesystem::path& root, const SceneGenConfig& config,
                                 uint64_t seed);

/// In-memory generation with the same streams as generate_dataset.
Dataset generate_in_memory(const SceneGenConfig& config, uint64_t seed);

void write_sample(const std::filesystem::path& dir, const AVSample& sample);
AVSample read_sample(const std::filesystem::path& dir, int semantic_bins);

DatasetManifest read_manifest(const std::filesystem::path& root);
Dataset load_dataset(const std::filesystem::path& root);

/// Loads root if its manifest hash matches config, otherwise generates it.
Dataset load_or_generate(const std::filesystem::path& root, const SceneGenConfig& config,
                         uint64_t seed);

}  // namespace multissl::scenegen
