#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "multissl/nn/encoder.hpp"
#include "multissl/nn/model_state.hpp"

namespace multissl::runner {

inline constexpr uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
  std::string config_hash;
  /// Trunk::describe() of the trained trunk.
  nlohmann::json trunk;
  std::string strategy;
  std::vector<std::string> tasks;
  uint64_t seed = 0;

  bool operator==(const CheckpointMeta&) const = default;
};

struct Checkpoint {
  CheckpointMeta meta;
  nn::ModelState state;

  bool operator==(const Checkpoint&) const = default;
};

/// Layout: 8-byte magic, uint32 version, uint64 header length, JSON header
/// (meta and a tensor index), then float64 payload: parameters in index
/// order followed by each optimizer slot's m and v. Written to a temporary
/// file and renamed into place.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);

/// Throws on a bad magic, a version other than kCheckpointVersion, a
/// truncated payload, or (unless force) a config hash other than
/// expected_hash when that is non-empty.
Checkpoint load_checkpoint(const std::filesystem::path& path, const std::string& expected_hash = {},
                           bool force = false);

/// Rebuilds the trunk described in the checkpoint with its trained values.
std::unique_ptr<nn::Trunk> restore_trunk(const Checkpoint& ckpt);

/// 16 hex digits over the checkpoint file's bytes.
std::string file_hash(const std::filesystem::path& path);

}  // namespace multissl::runner
