// Copyright 2026 The SGN Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sgn/autodiff/grad_check.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "sgn/common/error.h"

namespace sgn::ad {

GradCheckReport GradCheck(const std::function<Tensor()> &build,
                          std::vector<NamedInput> inputs,
                          const GradCheckOptions &options) {
  for (auto &in : inputs) {
    in.tensor.node()->requires_grad = true;
    in.tensor.ZeroGrad();
  }
  {
    Tensor out = build();
    if (out.numel() != 1) {
      throw DimensionError("grad_check: output must be scalar, got " +
                           ShapeString(out.shape()));
    }
    Backward(out);
  }

  // (input index, element index) pairs to probe.
  std::vector<std::pair<std::size_t, std::size_t>> probes;
  for (std::size_t k = 0; k < inputs.size(); ++k)
    for (std::size_t i = 0; i < inputs[k].tensor.numel(); ++i) probes.emplace_back(k, i);
  if (probes.size() > options.max_elements) {
    std::mt19937_64 rng(options.seed);
    std::shuffle(probes.begin(), probes.end(), rng);
    probes.resize(options.max_elements);
    std::sort(probes.begin(), probes.end());
  }

  GradCheckReport report;
  NoGradGuard no_grad;
  for (auto [k, i] : probes) {
    Tensor &t = inputs[k].tensor;
    const double analytic = t.has_grad() ? t.grad()[i] : 0.0;
    const double saved = t.data()[i];
    t.mutable_data()[i] = saved + options.epsilon;
    const double plus = build().item();
    t.mutable_data()[i] = saved - options.epsilon;
    const double minus = build().item();
    t.mutable_data()[i] = saved;
    const double numeric = (plus - minus) / (2.0 * options.epsilon);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), options.floor});
    const double rel = std::abs(analytic - numeric) / denom;
    ++report.checked;
    if (rel > report.max_rel_error || report.checked == 1) {
      report.max_rel_error = rel;
      report.worst_input = inputs[k].name;
      report.worst_index = i;
      report.worst_analytic = analytic;
      report.worst_numeric = numeric;
    }
  }
  report.passed = report.max_rel_error < options.tolerance;
  return report;
}

}  // namespace sgn::ad
