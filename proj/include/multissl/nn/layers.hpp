#pragma once

#include <string>
#include <utility>
#include <vector>

#include "multissl/core/rng.hpp"
#include "multissl/nn/ops.hpp"

namespace multissl::nn {

/// Ordered (name, parameter) list. Order is part of the contract: it fixes the
/// optimizer slot layout and the checkpoint layout.
using NamedParams = std::vector<std::pair<std::string, Var>>;

/// Fan-in-scaled uniform init, bound sqrt(6 / fan_in).
Tensor fan_in_uniform(Shape shape, int fan_in, Rng& rng);

void append_params(NamedParams& out, const std::string& prefix, const NamedParams& in);
void set_trainable(const NamedParams& params, bool trainable);
void zero_grads(const NamedParams& params);
/// Deep copy of the values into fresh leaves; trainability is preserved.
Var clone_param(const Var& p);
int64_t count_values(const NamedParams& params);

struct Linear {
  Var weight;
  Var bias;

  Linear() = default;
  Linear(int in, int out, Rng& rng);
  Var operator()(const Var& x) const { return linear(x, weight, bias); }
  NamedParams parameters() const { return {{"weight", weight}, {"bias", bias}}; }
  Linear clone() const { return {clone_param(weight), clone_param(bias)}; }

 private:
  Linear(Var w, Var b) : weight(std::move(w)), bias(std::move(b)) {}
};

struct Conv2d {
  Var weight;
  Var bias;
  int stride = 1;
  int pad = 0;

  Conv2d() = default;
  Conv2d(int in, int out, int kernel, int stride, int pad, Rng& rng);
  Var operator()(const Var& x) const { return conv2d(x, weight, bias, stride, pad); }
  NamedParams parameters() const { return {{"weight", weight}, {"bias", bias}}; }
  Conv2d clone() const;
};

}  // namespace multissl::nn
