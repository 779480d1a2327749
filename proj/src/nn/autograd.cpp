#include "multissl/nn/autograd.hpp"

#include <sstream>
#include <unordered_set>

#include "multissl/core/error.hpp"

namespace multissl::nn {

int64_t numel(const Shape& shape) {
  int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape s, double fill)
    : shape(std::move(s)), data(static_cast<size_t>(numel(shape)), fill) {}

Tensor::Tensor(Shape s, std::vector<double> values) : shape(std::move(s)), data(std::move(values)) {
  if (static_cast<int64_t>(data.size()) != numel(shape)) {
    throw Error("tensor data size " + std::to_string(data.size()) + " does not match shape " +
                to_string(shape));
  }
}

void require_shape(const Tensor& t, const Shape& expected, const char* what) {
  if (t.shape != expected) {
    throw Error(std::string(what) + ": shape mismatch, expected " + to_string(expected) +
                ", got " + to_string(t.shape));
  }
}

Tensor& Node::grad_buffer() {
  if (grad.empty()) grad = Tensor(value.shape, 0.0);
  return grad;
}

Var Var::constant(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return Var(std::move(n));
}

Var Var::parameter(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  return Var(std::move(n));
}

double Var::item() const {
  if (node_->value.size() != 1) {
    throw Error("item() on non-scalar of shape " + to_string(shape()));
  }
  return node_->value[0];
}

namespace {
thread_local bool grad_enabled = true;
}  // namespace

NoGradGuard::NoGradGuard() : previous_(grad_enabled) { grad_enabled = false; }
NoGradGuard::~NoGradGuard() { grad_enabled = previous_; }

Var make_node(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward_fn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  if (!grad_enabled) return Var(std::move(n));
  for (const auto& in : inputs) {
    if (in.requires_grad()) n->requires_grad = true;
  }
  if (n->requires_grad) {
    n->inputs.reserve(inputs.size());
    for (auto& in : inputs) n->inputs.push_back(in.ptr());
    n->backward_fn = std::move(backward_fn);
  }
  return Var(std::move(n));
}

void backward(const Var& root) {
  if (root.value().size() != 1) {
    throw Error("backward() requires a scalar root, got " + to_string(root.shape()));
  }
  if (!root.requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, size_t>> stack{{root.node(), 0}};
  seen.insert(root.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
  }
  // Interior gradients are not needed after the sweep.
  for (Node* n : order) {
    if (n->backward_fn) n->grad = Tensor();
  }
}

}  // namespace multissl::nn
