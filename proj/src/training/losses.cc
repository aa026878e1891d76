// Copyright 2026 The SGN Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sgn/training/losses.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sgn/autodiff/ops.h"
#include "sgn/common/error.h"

namespace sgn::train {

model::MaskSet ComputeMaskTargets(const data::MixtureSample &sample, const model::Frontend &frontend,
                                  double ratio) {
  const dsp::Grid mix = frontend.Analyze(sample.mixture).warped;
  model::MaskSet m;
  m.kind = model::MaskSet::Kind::kBinaryTarget;
  m.class_ids = sample.class_ids;
  m.rows = static_cast<std::size_t>(mix.rows());
  m.cols = static_cast<std::size_t>(mix.cols());
  m.values.reserve(sample.sources.size() * m.rows * m.cols);
  for (const auto &src : sample.sources) {
    const dsp::Grid s = frontend.Analyze(src).warped;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      m.values.push_back(s.data()[i] > ratio * mix.data()[i] ? 1.0 : 0.0);
    }
  }
  return m;
}

Tensor GroupingLoss(const Tensor &token_logits, const Tensor &presence_logits,
                    std::span<const double> presence, bool include_tokens) {
  const std::size_t c = presence_logits.numel();
  if (presence.size() != c) {
    throw DimensionError("presence has " + std::to_string(presence.size()) + " entries, expected " +
                         std::to_string(c));
  }
  Tensor bce = ad::Scale(ad::BceWithLogits(presence_logits, presence), static_cast<double>(c));
  if (!include_tokens) return bce;
  std::vector<std::size_t> identity(token_logits.dim(0));
  std::iota(identity.begin(), identity.end(), 0);
  return ad::Add(ad::CrossEntropy(token_logits, identity), bce);
}

Tensor ReconstructionLoss(const Tensor &mask_logits, std::span<const std::size_t> class_ids,
                          const model::MaskSet &target) {
  if (!std::equal(class_ids.begin(), class_ids.end(), target.class_ids.begin(), target.class_ids.end())) {
    throw DomainError("predicted and target masks list different class ids");
  }
  if (mask_logits.numel() != target.values.size()) {
    throw DimensionError("mask logits have " + std::to_string(mask_logits.numel()) +
                         " values, targets have " + std::to_string(target.values.size()));
  }
  return ad::Scale(ad::BceWithLogits(mask_logits, target.values), static_cast<double>(class_ids.size()));
}

double ReconstructionLoss(const model::MaskSet &pred, const model::MaskSet &target) {
  if (pred.class_ids != target.class_ids) {
    throw DomainError("predicted and target masks list different class ids");
  }
  if (pred.values.size() != target.values.size() || pred.rows != target.rows || pred.cols != target.cols) {
    throw DimensionError("predicted and target mask grids differ");
  }
  const std::size_t cells = pred.rows * pred.cols;
  double total = 0;
  for (std::size_t i = 0; i < pred.count(); ++i) {
    double sum = 0;
    for (std::size_t k = i * cells; k < (i + 1) * cells; ++k) {
      const double p = std::clamp(pred.values[k], 1e-12, 1 - 1e-12);
      const double y = target.values[k];
      sum -= y * std::log(p) + (1 - y) * std::log1p(-p);
    }
    total += sum / cells;
  }
  return total;
}

LossTerms TotalLoss(const model::ForwardResult &r, const model::MaskSet &target,
                    std::span<const double> presence, bool include_tokens) {
  LossTerms t;
  t.rec = ReconstructionLoss(r.mask_logits, r.class_ids, target);
  t.group = GroupingLoss(r.token_logits, r.presence_logits, presence, include_tokens);
  t.total = ad::Add(t.rec, t.group);
  return t;
}

}  // namespace sgn::train
