#include "multissl/nn/layers.hpp"

#include <cmath>

namespace multissl::nn {

Tensor fan_in_uniform(Shape shape, int fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  const double bound = std::sqrt(6.0 / std::max(fan_in, 1));
  for (auto& v : t.data) v = rng.uniform(-bound, bound);
  return t;
}

void append_params(NamedParams& out, const std::string& prefix, const NamedParams& in) {
  for (const auto& [name, p] : in) out.emplace_back(prefix + name, p);
}

void set_trainable(const NamedParams& params, bool trainable) {
  for (const auto& [name, p] : params) {
    p.set_requires_grad(trainable);
    if (!trainable) p.zero_grad();
  }
}

void zero_grads(const NamedParams& params) {
  for (const auto& [name, p] : params) p.zero_grad();
}

Var clone_param(const Var& p) {
  Var c = Var::parameter(p.value());
  c.set_requires_grad(p.requires_grad());
  return c;
}

int64_t count_values(const NamedParams& params) {
  int64_t n = 0;
  for (const auto& [name, p] : params) n += p.value().size();
  return n;
}

Linear::Linear(int in, int out, Rng& rng)
    : weight(Var::parameter(fan_in_uniform({out, in}, in, rng))),
      bias(Var::parameter(Tensor({out}, 0.0))) {}

Conv2d::Conv2d(int in, int out, int kernel, int stride_, int pad_, Rng& rng)
    : weight(Var::parameter(fan_in_uniform({out, in, kernel, kernel}, in * kernel * kernel, rng))),
      bias(Var::parameter(Tensor({out}, 0.0))),
      stride(stride_),
      pad(pad_) {}

Conv2d Conv2d::clone() const {
  Conv2d c;
  c.weight = clone_param(weight);
  c.bias = clone_param(bias);
  c.stride = stride;
  c.pad = pad;
  return c;
}

}  // namespace multissl::nn
