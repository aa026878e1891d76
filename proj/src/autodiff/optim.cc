// Copyright 2026 The SGN Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sgn/autodiff/optim.h"

#include <cmath>

#include "sgn/common/error.h"

namespace sgn::ad {

Parameter::Parameter(std::string n, Tensor v)
    : name(std::move(n)), value(std::move(v)), momentum(value.numel(), 0.0) {}

Tensor ParameterSet::Add(const std::string &name, Tensor value) {
  if (Contains(name)) throw Error("duplicate parameter name '" + name + "'");
  value.node()->requires_grad = true;
  params_.emplace_back(name, std::move(value));
  return params_.back().value;
}

Parameter &ParameterSet::Get(const std::string &name) {
  for (auto &p : params_)
    if (p.name == name) return p;
  throw Error("unknown parameter '" + name + "'");
}

const Parameter &ParameterSet::Get(const std::string &name) const {
  for (const auto &p : params_)
    if (p.name == name) return p;
  throw Error("unknown parameter '" + name + "'");
}

bool ParameterSet::Contains(const std::string &name) const {
  for (const auto &p : params_)
    if (p.name == name) return true;
  return false;
}

std::size_t ParameterSet::TotalElements() const {
  std::size_t n = 0;
  for (const auto &p : params_) n += p.value.numel();
  return n;
}

void ParameterSet::ZeroGrad() {
  for (auto &p : params_) p.value.ZeroGrad();
}

void SgdStep(std::span<Parameter *const> params, double lr, double momentum) {
  for (const Parameter *p : params) {
    if (!p->value.has_grad()) {
      throw Error("sgd_step: parameter '" + p->name + "' has no gradient");
    }
  }
  for (Parameter *p : params) {
    auto data = p->value.mutable_data();
    auto grad = p->value.grad();
    for (std::size_t i = 0; i < data.size(); ++i) {
      p->momentum[i] = momentum * p->momentum[i] + grad[i];
      data[i] -= lr * p->momentum[i];
    }
    p->value.ZeroGrad();
  }
}

Tensor UniformFanIn(Shape shape, std::size_t fan_in, std::mt19937_64 &rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> data(NumElements(shape));
  for (auto &v : data) v = dist(rng);
  return Tensor::FromData(std::move(shape), std::move(data));
}

Tensor Gaussian(Shape shape, double stddev, std::mt19937_64 &rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> data(NumElements(shape));
  for (auto &v : data) v = dist(rng);
  return Tensor::FromData(std::move(shape), std::move(data));
}

}  // namespace sgn::ad
