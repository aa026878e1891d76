// Copyright 2026 The SGN Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sgn/autodiff/tensor.h"

#include <cmath>
#include <sstream>
#include <unordered_set>

#include "sgn/common/error.h"

namespace sgn::ad {

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

std::size_t NumElements(const Shape &shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string ShapeString(const Shape &shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

std::vector<double> &Node::GradBuffer() {
  if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  return grad;
}

Tensor Tensor::Zeros(Shape shape, bool requires_grad) {
  return Full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::Full(Shape shape, double value, bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->value.assign(NumElements(shape), value);
  node->shape = std::move(shape);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::FromData(Shape shape, std::vector<double> data,
                        bool requires_grad) {
  if (NumElements(shape) != data.size()) {
    throw DimensionError("tensor data length " + std::to_string(data.size()) +
                         " does not match shape " + ShapeString(shape));
  }
  for (double v : data) {
    if (!std::isfinite(v)) throw NonFiniteError("non-finite tensor data");
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::Scalar(double value, bool requires_grad) {
  return FromData({1}, {value}, requires_grad);
}

const Shape &Tensor::shape() const { return node_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= node_->shape.size()) {
    throw DimensionError("axis " + std::to_string(axis) +
                         " out of range for shape " + ShapeString(shape()));
  }
  return node_->shape[axis];
}

std::size_t Tensor::numel() const { return node_->value.size(); }

std::span<const double> Tensor::data() const { return node_->value; }

std::span<double> Tensor::mutable_data() { return node_->value; }

double Tensor::item() const {
  if (numel() != 1) {
    throw DimensionError("item() on tensor of shape " + ShapeString(shape()));
  }
  return node_->value[0];
}

bool Tensor::requires_grad() const { return node_->requires_grad; }

bool Tensor::has_grad() const {
  return !node_->grad.empty() && node_->grad.size() == node_->value.size();
}

std::span<const double> Tensor::grad() const { return node_->grad; }

std::span<double> Tensor::mutable_grad() { return node_->GradBuffer(); }

void Tensor::ZeroGrad() { node_->grad.clear(); }

const std::string &Tensor::op() const { return node_->op; }

Tensor MakeOp(Shape shape, std::vector<double> value, std::string_view op,
              std::vector<Tensor> inputs, BackwardFn backward) {
  for (double v : value) {
    if (!std::isfinite(v)) {
      throw NonFiniteError("non-finite value produced by op '" +
                           std::string(op) + "'");
    }
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op = std::string(op);
  bool needs_grad = false;
  if (g_grad_enabled) {
    for (const auto &t : inputs) needs_grad = needs_grad || t.requires_grad();
  }
  if (needs_grad) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (auto &t : inputs) node->inputs.push_back(t.shared_node());
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

Tape Tape::Record(const Tensor &root) {
  Tape tape;
  tape.root_ = root.shared_node();
  if (!root.requires_grad()) return tape;
  // Iterative post-order DFS; only nodes that carry gradients are recorded.
  std::unordered_set<Node *> visited;
  std::vector<std::pair<Node *, std::size_t>> stack;
  stack.emplace_back(root.node(), 0);
  visited.insert(root.node());
  while (!stack.empty()) {
    auto &[node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node *child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) {
        stack.emplace_back(child, 0);
      }
    } else {
      tape.order_.push_back(node);
      stack.pop_back();
    }
  }
  return tape;
}

void Tape::ReplayBackward() const {
  if (!root_ || !root_->requires_grad) return;
  if (root_->value.size() != 1) {
    throw DimensionError("backward requires a single-element output, got " +
                         ShapeString(root_->shape));
  }
  // Intermediate gradients start fresh; leaf gradients accumulate.
  for (Node *node : order_) {
    if (!node->inputs.empty()) node->grad.assign(node->value.size(), 0.0);
  }
  root_->GradBuffer()[0] += 1.0;
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    Node *node = *it;
    if (node->backward) node->backward(*node);
  }
}

void Backward(const Tensor &root) { Tape::Record(root).ReplayBackward(); }

bool GradEnabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) {
  g_grad_enabled = false;
}

NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

}  // namespace sgn::ad
