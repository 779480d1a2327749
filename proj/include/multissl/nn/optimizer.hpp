#pragma once

#include <map>
#include <string>

#include "multissl/nn/layers.hpp"

namespace multissl::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamSlot {
  Tensor m;
  Tensor v;
  bool operator==(const AdamSlot&) const = default;
};

/// Adam with moment slots keyed by parameter name. Parameters that are frozen
/// or received no gradient in a step are left untouched.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  void step(const NamedParams& params);
  const AdamConfig& config() const { return config_; }
  int64_t steps() const { return t_; }
  const std::map<std::string, AdamSlot>& slots() const { return slots_; }

  void restore(int64_t t, std::map<std::string, AdamSlot> slots) {
    t_ = t;
    slots_ = std::move(slots);
  }

 private:
  AdamConfig config_;
  int64_t t_ = 0;
  std::map<std::string, AdamSlot> slots_;
};

}  // namespace multissl::nn
