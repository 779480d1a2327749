#pragma once

#include <functional>
#include <string>
#include <vector>

#include "multissl/core/rng.hpp"
#include "multissl/nn/autograd.hpp"

namespace multissl::testkit {

nn::Tensor random_tensor(nn::Shape shape, Rng& rng, double scale = 1.0);

/// Relative error ||fd - analytic|| / (||fd|| + ||analytic||) of the
/// gradient of `loss` with respect to all leaves, central differences with
/// step h.
double gradient_error(const std::function<nn::Var()>& loss, const std::vector<nn::Var>& leaves, double h = 1e-3);

struct GradientItem {
  std::string name;
  int configurations = 0;
  double worst = 0.0;
};

/// Every loss and every head kind, each on `configurations` random shapes and
/// values drawn from Rng(seed).
std::vector<GradientItem> gradient_suite(int configurations, uint64_t seed);

}  // namespace multissl::testkit
