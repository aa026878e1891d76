// Copyright 2026 The SGN Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sgn/model/pipeline.h"

#include <algorithm>

#include "sgn/autodiff/ops.h"
#include "sgn/common/error.h"

namespace sgn::model {

Frontend::Frontend(std::size_t grid)
    : grid_(grid), stft_(grid), warp_(stft_.bins(), grid) {}

dsp::Spectrogram Frontend::Analyze(const dsp::Waveform &w) const { return dsp::Analyze(stft_, warp_, w); }

std::vector<dsp::Waveform> Frontend::Resynthesize(const dsp::Spectrogram &mixture, const MaskSet &masks,
                                                  std::size_t length) const {
  if (masks.rows != grid_ || masks.cols != grid_) {
    throw DimensionError("masks are " + std::to_string(masks.rows) + "x" + std::to_string(masks.cols) +
                         ", frontend grid is " + std::to_string(grid_));
  }
  std::vector<dsp::Waveform> out;
  for (std::size_t i = 0; i < masks.count(); ++i) {
    const dsp::Grid linear = warp_.Unwarp(masks.MaskGrid(i)).cwiseMax(0.0).cwiseMin(1.0);
    const dsp::Grid real = mixture.real.cwiseProduct(linear);
    const dsp::Grid imag = mixture.imag.cwiseProduct(linear);
    out.push_back(stft_.Inverse(real, imag, length));
  }
  return out;
}

Separation Separate(const SemanticGroupingNet &model, const Frontend &frontend, const dsp::Waveform &mixture,
                    std::span<const std::size_t> class_ids, const SeparationOptions &options) {
  if (model.config().grid != frontend.grid()) throw DimensionError("model and frontend grids differ");
  ad::NoGradGuard no_grad;
  const dsp::Spectrogram spec = frontend.Analyze(mixture);
  const ForwardResult r = model.Forward(PrepareInput(spec.warped), class_ids);
  Separation s;
  s.class_ids.assign(class_ids.begin(), class_ids.end());
  const ad::Tensor p = ad::Sigmoid(r.presence_logits);
  s.presence.assign(p.data().begin(), p.data().end());
  if (class_ids.empty()) return s;
  s.masks = PredictedMasks(r.mask_logits, class_ids, frontend.grid());
  if (options.binarize) {
    for (double &v : s.masks.values) v = v > 0.5 ? 1.0 : 0.0;
  }
  s.estimates = frontend.Resynthesize(spec, s.masks, frontend.clip_length());
  return s;
}

std::vector<double> PredictPresence(const SemanticGroupingNet &model, const Frontend &frontend,
                                    const dsp::Waveform &mixture) {
  return Separate(model, frontend, mixture, {}).presence;
}

}  // namespace sgn::model
