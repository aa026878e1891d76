// Copyright 2026 The SGN Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sgn/autodiff/tensor.h"

namespace sgn::ad {

struct GradCheckOptions {
  double tolerance = 1e-5;
  double epsilon = 1e-4;
  // Denominator floor of the relative error. Gradients smaller than this are
  // compared in absolute terms, since central differences cannot resolve
  // them below roughly machine_eps * |loss| / epsilon.
  double floor = 1e-8;
  // Above this many elements in total, a random subsample of this size is
  // checked instead of every element.
  std::size_t max_elements = 10000;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_input;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
  bool passed = false;
};

struct NamedInput {
  std::string name;
  Tensor tensor;
};

// Compares reverse-mode gradients of the scalar produced by `build` against
// central finite differences for every element of `inputs`. Relative error
// is |a - n| / max(|a|, |n|, 1e-8). `build` is re-invoked for every
// perturbation and must be deterministic.
GradCheckReport GradCheck(const std::function<Tensor()> &build,
                          std::vector<NamedInput> inputs,
                          const GradCheckOptions &options = {});

}  // namespace sgn::ad
