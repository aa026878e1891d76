// Copyright 2026 The SGN Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Dense tensors with reverse-mode automatic differentiation.
//
// A Tensor is a cheap handle to a shared graph node. Operations on tensors
// that require gradients record their inputs and a backward closure on the
// output node; backward() sorts the reachable graph into a Tape and replays
// it in reverse. Leaf gradients accumulate across backward calls until they
// are cleared, which is how mini-batches are assembled one sample at a time.

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sgn::ad {

using Shape = std::vector<std::size_t>;

std::size_t NumElements(const Shape &shape);
std::string ShapeString(const Shape &shape);

struct Node;
using BackwardFn = std::function<void(Node &self)>;

struct Node {
  Shape shape;
  std::vector<double> value;
  // Empty until a gradient flows into the node.
  std::vector<double> grad;
  bool requires_grad = false;
  std::string op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  BackwardFn backward;

  // Returns the gradient buffer, allocating zeros on first use.
  std::vector<double> &GradBuffer();
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor Zeros(Shape shape, bool requires_grad = false);
  static Tensor Full(Shape shape, double value, bool requires_grad = false);
  static Tensor FromData(Shape shape, std::vector<double> data,
                         bool requires_grad = false);
  static Tensor Scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape &shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  // Mutable access is meant for leaves (parameter updates, fixtures).
  std::span<double> mutable_data();
  double item() const;
  double operator[](std::size_t i) const { return data()[i]; }

  bool requires_grad() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void ZeroGrad();

  const std::string &op() const;
  Node *node() const { return node_.get(); }
  const std::shared_ptr<Node> &shared_node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Builds an op output. When gradient recording is enabled and any input
// requires a gradient, the output keeps its inputs and the backward closure;
// otherwise both are dropped. Throws NonFiniteError if `value` holds a NaN
// or Inf.
Tensor MakeOp(Shape shape, std::vector<double> value, std::string_view op,
              std::vector<Tensor> inputs, BackwardFn backward);

// Reverse topological record of the graph reachable from a root.
class Tape {
 public:
  static Tape Record(const Tensor &root);

  std::size_t size() const { return order_.size(); }
  // Nodes in forward (topological) order; backward walks it from the end.
  std::span<Node *const> order() const { return order_; }

  // Seeds d(root)/d(root) = 1 and runs every recorded backward once.
  void ReplayBackward() const;

 private:
  std::vector<Node *> order_;
  std::shared_ptr<Node> root_;
};

// Backpropagates from a single-element tensor.
void Backward(const Tensor &root);

bool GradEnabled();

// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard &) = delete;
  NoGradGuard &operator=(const NoGradGuard &) = delete;

 private:
  bool previous_;
};

}  // namespace sgn::ad
