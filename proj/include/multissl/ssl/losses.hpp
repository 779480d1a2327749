#pragma once

#include <span>
#include <vector>

#include "multissl/nn/ops.hpp"

namespace multissl::ssl {

using nn::Tensor;
using nn::Var;

/// Cross-entropy of rotation logits [N, B] against bins in [0, B).
Var spatial_alignment_loss(const Var& logits, std::span<const int> labels, int bins);

/// Anchors a_i and positives v_p are [N, d] and L2-normalized. With
/// negatives [K, d] every anchor is contrasted against that shared set;
/// without them the other rows' positives serve as negatives.
struct ContrastiveBatch {
  Var anchors;
  Var positives;
  Var negatives;
};

/// Mean over anchors of -log(e^{v_p.a/tau} / (e^{v_p.a/tau} + sum_n e^{v_n.a/tau})).
Var info_nce(const ContrastiveBatch& batch, double tau);
Var foreground_alignment_loss(const ContrastiveBatch& batch, double tau);

/// Huber loss of gap predictions [N, 1] against normalized gaps in [0, 1].
Var temporal_gap_loss(const Var& predicted, std::span<const double> deltas, double kappa);

/// InfoNCE of queries q [N, d] against their keys k [N, d] and a queue of
/// negatives [K, d]. Keys and queue carry no gradient.
Var global_contrastive_loss(const Var& q, const Tensor& k, const Tensor& queue, double tau);

/// For each of the `locations` rows of every sample in q, the index of the
/// most similar row of the same sample in k (ties to the lowest index).
std::vector<int> dense_correspondence(const Tensor& q, const Tensor& k, int locations);

/// Per-location InfoNCE: query rows q [N*S, d] against their best-matching
/// key rows k [N*S, d] of the same sample and the shared negatives [K, d];
/// mean over all locations.
Var dense_contrastive_loss(const Var& q, const Tensor& k, int locations, const Tensor& negatives, double tau);

/// [N, d, H, W] -> [N*H*W, d] with each location L2-normalized.
Var dense_rows(const Var& dense);

/// KL(softmax(target/T) || softmax(logits/T)) averaged over rows; zero
/// exactly when logits equal the target.
Var soft_target_distillation(const Var& logits, const Tensor& target_logits, double temperature);

}  // namespace multissl::ssl
