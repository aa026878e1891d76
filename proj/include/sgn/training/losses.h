// Copyright 2026 The SGN Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <span>
#include <vector>

#include "sgn/autodiff/tensor.h"
#include "sgn/data/dataset.h"
#include "sgn/model/pipeline.h"
#include "sgn/model/sgn.h"

namespace sgn::train {

using ad::Tensor;

// m_i[f, t] = 1 where the warped magnitude of source i exceeds
// ratio * warped mixture magnitude. Waveforms are fitted to the frontend clip.
model::MaskSet ComputeMaskTargets(const data::MixtureSample &sample, const model::Frontend &frontend,
                                  double ratio = 0.5);

// sum_i CE(one_hot(i), softmax(token_logits_i)) + sum_i BCE(y_i, sigmoid(p_i)).
// The token term is left out when include_tokens is false.
Tensor GroupingLoss(const Tensor &token_logits, const Tensor &presence_logits,
                    std::span<const double> presence, bool include_tokens = true);

// Sum over sources of the grid-mean BCE. Class ids of the logits and the
// target must agree in order.
Tensor ReconstructionLoss(const Tensor &mask_logits, std::span<const std::size_t> class_ids,
                          const model::MaskSet &target);

// The same quantity on probability masks, without a graph. Probabilities
// are clamped to [1e-12, 1 - 1e-12].
double ReconstructionLoss(const model::MaskSet &pred, const model::MaskSet &target);

struct LossTerms {
  Tensor total;
  Tensor rec;
  Tensor group;
};

LossTerms TotalLoss(const model::ForwardResult &r, const model::MaskSet &target,
                    std::span<const double> presence, bool include_tokens = true);

}  // namespace sgn::train
