#pragma once

#include <string>
#include <utility>
#include <vector>

#include "multissl/nn/optimizer.hpp"

namespace multissl::nn {

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

/// Plain-value copy of a model: parameter tensors, optimizer slots and the
/// step counter. This is what checkpoints persist.
struct ModelState {
  NamedTensors params;
  int64_t optimizer_steps = 0;
  std::map<std::string, AdamSlot> optimizer_slots;
  int64_t step = 0;

  bool operator==(const ModelState&) const = default;
  /// Throws naming the first non-finite parameter.
  void check_finite() const;
};

NamedTensors snapshot(const NamedParams& params);
ModelState capture(const NamedParams& params, const Adam* optimizer, int64_t step);
/// Copies values into the matching parameters by name. Every parameter must be
/// present with the same shape; extra entries are an error unless
/// allow_extra is set.
void restore(const NamedParams& params, const NamedTensors& values, bool allow_extra = false);
/// Values with the given name prefix, prefix stripped.
NamedTensors with_prefix(const NamedTensors& values, const std::string& prefix);
/// Bitwise equality of current values against a snapshot.
bool same_values(const NamedParams& params, const NamedTensors& values);

}  // namespace multissl::nn
