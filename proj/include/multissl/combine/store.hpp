#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "multissl/nn/tensor.hpp"
#include "multissl/ssl/tasks.hpp"

namespace multissl::combine {

/// Write-once table (task, sample id) -> row vector. Each task's rows are
/// added in one seal() call and never change afterwards.
///
/// On disk: <stem>.bin holds the rows as little-endian float64, task after
/// task; <stem>.json lists per task its kind, dim, row offset, model hash and
/// sample ids in row order.
class SampleTable {
 public:
  struct Entry {
    std::string kind;
    int dim = 0;
    std::string model_hash;
    std::vector<std::string> ids;
    std::unordered_map<std::string, int> index;
    nn::Tensor rows;  // [ids.size(), dim]

    bool operator==(const Entry& o) const {
      return kind == o.kind && dim == o.dim && model_hash == o.model_hash && ids == o.ids && rows == o.rows;
    }
  };

  void seal(ssl::TaskId task, std::string kind, std::vector<std::string> ids, nn::Tensor rows,
            std::string model_hash);
  bool sealed(ssl::TaskId task) const { return entries_.count(task) != 0; }
  const Entry& entry(ssl::TaskId task) const;
  /// Rows for the given ids, [ids.size(), dim]. Missing ids are an error.
  nn::Tensor lookup(ssl::TaskId task, std::span<const std::string> ids) const;
  /// Throws unless every task entry covers exactly the given ids.
  void check_covers(std::span<const std::string> ids) const;

  void save(const std::filesystem::path& stem) const;
  static SampleTable load(const std::filesystem::path& stem);

  bool operator==(const SampleTable& o) const { return entries_ == o.entries_; }
  const std::map<ssl::TaskId, Entry>& entries() const { return entries_; }

 private:
  std::map<ssl::TaskId, Entry> entries_;
};

/// Recorded head outputs of sealed tasks, the targets of incremental
/// learning's distillation terms.
using ResponseStore = SampleTable;
/// Normalized trunk embeddings of single-task models.
using FeatureBank = SampleTable;

/// 16-hex-digit hash of parameter values.
std::string model_hash(const nn::NamedParams& params);

}  // namespace multissl::combine
