#include "multissl/ssl/losses.hpp"

#include <cmath>

#include "multissl/core/error.hpp"

namespace multissl::ssl {

using namespace nn;

Var spatial_alignment_loss(const Var& logits, std::span<const int> labels, int bins) {
  if (logits.value().rank() != 2 || logits.dim(1) != bins) {
    throw Error("spatial_alignment_loss: expected logits [N," + std::to_string(bins) + "], got " +
                to_string(logits.shape()));
  }
  for (int y : labels) {
    if (y < 0 || y >= bins) throw Error("spatial_alignment_loss: label " + std::to_string(y) + " outside [0, B)");
  }
  return cross_entropy(logits, labels);
}

Var info_nce(const ContrastiveBatch& batch, double tau) {
  if (!(tau > 0.0)) throw Error("temperature must be positive");
  const Var& a = batch.anchors;
  const Var& p = batch.positives;
  if (a.shape() != p.shape() || a.value().rank() != 2) {
    throw Error("info_nce: anchors " + to_string(a.shape()) + " and positives " + to_string(p.shape()) + " differ");
  }
  const int n = a.dim(0);
  std::vector<int> labels;
  Var logits;
  if (batch.negatives.defined()) {
    if (batch.negatives.value().rank() != 2 || batch.negatives.dim(0) < 1) {
      throw Error("info_nce: empty negative set");
    }
    if (batch.negatives.dim(1) != a.dim(1)) throw Error("info_nce: negatives have the wrong dimension");
    Var pos = reshape(row_dot(a, p), {n, 1});
    logits = concat({pos, matmul(a, transpose(batch.negatives))}, 1);
    labels.assign(static_cast<size_t>(n), 0);
  } else {
    if (n < 2) throw Error("info_nce: empty negative set (batch of one)");
    logits = matmul(a, transpose(p));
    for (int i = 0; i < n; ++i) labels.push_back(i);
  }
  return cross_entropy(scale(logits, 1.0 / tau), labels);
}

Var foreground_alignment_loss(const ContrastiveBatch& batch, double tau) { return info_nce(batch, tau); }

Var temporal_gap_loss(const Var& predicted, std::span<const double> deltas, double kappa) {
  if (!(kappa > 0.0)) throw Error("huber threshold must be positive");
  const int n = static_cast<int>(deltas.size());
  if (predicted.shape() != Shape{n, 1}) {
    throw Error("temporal_gap_loss: predictions " + to_string(predicted.shape()) + " for " + std::to_string(n) +
                " gaps");
  }
  Tensor target({n, 1});
  for (int i = 0; i < n; ++i) {
    const double d = deltas[static_cast<size_t>(i)];
    if (!(d >= 0.0 && d <= 1.0)) throw Error("temporal_gap_loss: delta outside [0, 1]");
    target[i] = d;
  }
  return huber(predicted, target, kappa);
}

Var global_contrastive_loss(const Var& q, const Tensor& k, const Tensor& queue, double tau) {
  return info_nce({q, Var::constant(k), Var::constant(queue)}, tau);
}

std::vector<int> dense_correspondence(const Tensor& q, const Tensor& k, int locations) {
  if (q.shape != k.shape) {
    throw Error("dense contrastive: spatial sizes differ, " + to_string(q.shape) + " vs " + to_string(k.shape));
  }
  const int rows = q.dim(0), d = q.dim(1);
  if (locations < 1 || rows % locations != 0) throw Error("dense contrastive: rows not a multiple of locations");
  std::vector<int> match(static_cast<size_t>(rows));
  for (int r = 0; r < rows; ++r) {
    const int base = r / locations * locations;
    double best = -INFINITY;
    int arg = base;
    for (int j = base; j < base + locations; ++j) {
      double s = 0.0;
      for (int c = 0; c < d; ++c) s += q[static_cast<int64_t>(r) * d + c] * k[static_cast<int64_t>(j) * d + c];
      if (s > best) {
        best = s;
        arg = j;
      }
    }
    match[static_cast<size_t>(r)] = arg;
  }
  return match;
}

Var dense_contrastive_loss(const Var& q, const Tensor& k, int locations, const Tensor& negatives, double tau) {
  const auto match = dense_correspondence(q.value(), k, locations);
  const int d = k.dim(1);
  Tensor pos(k.shape);
  for (size_t r = 0; r < match.size(); ++r) {
    std::copy_n(k.data.begin() + static_cast<std::ptrdiff_t>(match[r]) * d, d,
                pos.data.begin() + static_cast<std::ptrdiff_t>(r) * d);
  }
  return info_nce({q, Var::constant(std::move(pos)), Var::constant(negatives)}, tau);
}

Var dense_rows(const Var& dense) { return l2_normalize(channels_last(dense)); }

Var soft_target_distillation(const Var& logits, const Tensor& target_logits, double temperature) {
  if (!(temperature > 0.0)) throw Error("distillation temperature must be positive");
  require_shape(target_logits, logits.shape(), "soft_target_distillation");
  const Tensor target_log = log_softmax(scale(Var::constant(target_logits), 1.0 / temperature)).value();
  Tensor weights = target_log;
  const double inv_n = 1.0 / logits.dim(0);
  for (auto& v : weights.data) v = std::exp(v) * inv_n;
  Var diff = sub(Var::constant(target_log), log_softmax(scale(logits, 1.0 / temperature)));
  return sum(mul(diff, Var::constant(std::move(weights))));
}

}  // namespace multissl::ssl
