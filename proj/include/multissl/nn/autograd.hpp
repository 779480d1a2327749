#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "multissl/nn/tensor.hpp"

namespace multissl::nn {

/// One vertex of the reverse-mode graph. Leaves are parameters or constants;
/// interior nodes carry a closure that pushes their gradient to their inputs.
struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;

  /// Gradient buffer, zero-initialized on first use.
  Tensor& grad_buffer();
};

/// Shared handle to a graph node.
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Var constant(Tensor value);
  static Var parameter(Tensor value);

  bool defined() const { return static_cast<bool>(node_); }
  const Tensor& value() const { return node_->value; }
  /// Handle semantics: mutates the shared node.
  Tensor& mutable_value() const { return node_->value; }
  const Shape& shape() const { return node_->value.shape; }
  int dim(int i) const { return node_->value.dim(i); }
  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) const { node_->requires_grad = on; }
  bool has_grad() const { return !node_->grad.empty(); }
  const Tensor& grad() const { return node_->grad; }
  void zero_grad() const { node_->grad = Tensor(); }
  double item() const;

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& ptr() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// Disables graph recording on this thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Creates an interior node. The closure is dropped when no input requires a
/// gradient, so inference graphs hold no backward state.
Var make_node(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward_fn);

/// Back-propagates from a scalar root, accumulating into every reachable leaf
/// that requires a gradient.
void backward(const Var& root);

}  // namespace multissl::nn
