#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "multissl/nn/tensor.hpp"

namespace multissl::downstream {

using nn::Tensor;

/// Fraction of query rows whose most cosine-similar gallery row is the row
/// with the same index. Rows are normalized here; ties go to the lowest
/// gallery index.
double retrieval_top1(const Tensor& queries, const Tensor& gallery);

/// Per-class confusion counts for labels in [0, num_classes]; the label
/// num_classes is background and is not scored.
struct ConfusionCounts {
  int num_classes = 0;
  std::vector<int64_t> tp, fp, fn;

  explicit ConfusionCounts(int classes);
  void add(std::span<const int> predicted, std::span<const int> truth);
  /// Mean IoU over classes present in the prediction or the ground truth;
  /// 1 when no class is present in either.
  double mean_iou() const;
};

double mean_iou(std::span<const int> predicted, std::span<const int> truth, int num_classes);

/// Mean of squared differences.
double mean_squared_error(const Tensor& predicted, const Tensor& target);

struct ProbeConfig {
  int steps = 300;
  double lr = 0.05;
  double weight_decay = 1e-4;
};

/// Multinomial logistic regression on standardized features, trained by
/// full-batch Adam from zero weights. Returns held-out top-1 accuracy.
double linear_probe(const Tensor& train_x, std::span<const int> train_y, const Tensor& test_x,
                    std::span<const int> test_y, int num_classes, const ProbeConfig& config);

/// Ridge regression x -> y fitted on standardized x with a bias; returns
/// predictions for x_eval.
Tensor ridge_fit_predict(const Tensor& x, const Tensor& y, const Tensor& x_eval, double alpha);

}  // namespace multissl::downstream
