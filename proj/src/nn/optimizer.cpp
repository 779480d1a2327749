#include "multissl/nn/optimizer.hpp"

#include <cmath>

#include "multissl/core/error.hpp"

namespace multissl::nn {

void Adam::step(const NamedParams& params) {
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (const auto& [name, p] : params) {
    if (!p.requires_grad() || !p.has_grad()) continue;
    auto& slot = slots_[name];
    if (slot.m.empty()) {
      slot.m = Tensor(p.shape(), 0.0);
      slot.v = Tensor(p.shape(), 0.0);
    }
    if (slot.m.shape != p.shape()) throw Error("adam: slot '" + name + "' changed shape");
    const Tensor& g = p.grad();
    Tensor& w = p.mutable_value();
    for (int64_t i = 0; i < w.size(); ++i) {
      slot.m[i] = config_.beta1 * slot.m[i] + (1.0 - config_.beta1) * g[i];
      slot.v[i] = config_.beta2 * slot.v[i] + (1.0 - config_.beta2) * g[i] * g[i];
      w[i] -= config_.lr * (slot.m[i] / c1) / (std::sqrt(slot.v[i] / c2) + config_.eps);
    }
  }
}

}  // namespace multissl::nn
