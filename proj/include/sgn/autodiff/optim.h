// Copyright 2026 The SGN Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sgn/autodiff/tensor.h"

namespace sgn::ad {

// A trainable leaf tensor plus its SGD momentum buffer.
struct Parameter {
  std::string name;
  Tensor value;
  std::vector<double> momentum;

  Parameter(std::string name, Tensor value);
};

// Ordered, name-addressable collection of parameters. Order is the
// registration order and defines checkpoint layout.
class ParameterSet {
 public:
  Tensor Add(const std::string &name, Tensor value);

  Parameter &Get(const std::string &name);
  const Parameter &Get(const std::string &name) const;
  bool Contains(const std::string &name) const;

  std::span<Parameter> all() { return params_; }
  std::span<const Parameter> all() const { return params_; }
  std::size_t size() const { return params_.size(); }
  std::size_t TotalElements() const;

  void ZeroGrad();

 private:
  std::vector<Parameter> params_;
};

// v <- momentum * v + grad; p <- p - lr * v; then clears the gradients.
// Throws sgn::Error naming the first parameter that has no gradient.
void SgdStep(std::span<Parameter *const> params, double lr, double momentum);

// Weight init helpers, all drawing from `rng`.
Tensor UniformFanIn(Shape shape, std::size_t fan_in, std::mt19937_64 &rng);
Tensor Gaussian(Shape shape, double stddev, std::mt19937_64 &rng);

}  // namespace sgn::ad
