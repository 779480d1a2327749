#pragma once

#include <span>
#include <vector>

#include "multissl/nn/autograd.hpp"

namespace multissl::nn {

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);

/// a [n,k] x b [k,m]
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
/// x [n,in], weight [out,in], bias [out]
Var linear(const Var& x, const Var& weight, const Var& bias);
/// x [N,C,H,W], weight [O,C,K,K], bias [O]
Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int pad);

Var silu(const Var& x);
Var relu(const Var& x);
Var sigmoid(const Var& x);

Var reshape(const Var& x, Shape shape);
Var concat(const std::vector<Var>& parts, int axis);
Var slice(const Var& x, int axis, int start, int length);
/// Mean over one axis, which is removed from the shape.
Var mean_axis(const Var& x, int axis);
/// [N,C,H,W] -> [N,C]
Var spatial_mean(const Var& x);
/// [N,C,H,W] -> [N*H*W, C]
Var channels_last(const Var& x);
/// [N,C,h,w] -> [N,C,H,W] by nearest source index floor(i*h/H).
Var upsample_nearest(const Var& x, int height, int width);

Var sum(const Var& x);
Var mean(const Var& x);
/// Rows of x [n,d] scaled to unit Euclidean norm.
Var l2_normalize(const Var& x);
/// Row-wise dot product of a [n,d] and b [n,d] -> [n]
Var row_dot(const Var& a, const Var& b);

Var log_softmax(const Var& logits);
/// Mean over rows of -log softmax(logits)[label].
Var cross_entropy(const Var& logits, std::span<const int> labels);
/// Mean over rows of -sum_j target_j * log softmax(logits / temperature)_j.
Var soft_cross_entropy(const Var& logits, const Tensor& target_probs, double temperature);
/// Mean squared error against a constant target.
Var mse(const Var& pred, const Tensor& target);
/// Mean Huber loss with threshold kappa against a constant target.
Var huber(const Var& pred, const Tensor& target, double kappa);

/// Plain-value helpers shared by the loss code.
Tensor softmax_rows(const Tensor& logits, double temperature = 1.0);
double huber_value(double error, double kappa);

}  // namespace multissl::nn
