// Copyright 2026 The SGN Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Waveform -> network input and masks -> waveforms.

#pragma once

#include <random>
#include <span>
#include <vector>

#include "sgn/dsp/stft.h"
#include "sgn/dsp/warp.h"
#include "sgn/model/sgn.h"

namespace sgn::model {

// STFT plus log-frequency warp sized for a model grid: `grid` frames and
// `grid` log bins.
class Frontend {
 public:
  explicit Frontend(std::size_t grid);

  std::size_t grid() const { return grid_; }
  const dsp::Stft &stft() const { return stft_; }
  const dsp::LogFrequencyWarp &warp() const { return warp_; }
  std::size_t clip_length() const { return stft_.clip_length(); }

  dsp::Spectrogram Analyze(const dsp::Waveform &w) const;

  // Unwarps each mask to linear bins, applies it to the mixture magnitude
  // and inverts with the mixture phase. Output length is `length`.
  std::vector<dsp::Waveform> Resynthesize(const dsp::Spectrogram &mixture, const MaskSet &masks,
                                          std::size_t length) const;

 private:
  std::size_t grid_;
  dsp::Stft stft_;
  dsp::LogFrequencyWarp warp_;
};

struct SeparationOptions {
  bool binarize = false;  // threshold masks at 0.5 before applying them
};

struct Separation {
  std::vector<std::size_t> class_ids;
  std::vector<double> presence;  // sigmoid of the presence logits
  MaskSet masks;
  std::vector<dsp::Waveform> estimates;
};

// Runs the model without gradient recording. With empty `class_ids` only
// presence is filled in.
Separation Separate(const SemanticGroupingNet &model, const Frontend &frontend,
                    const dsp::Waveform &mixture, std::span<const std::size_t> class_ids,
                    const SeparationOptions &options = {});

// Presence probabilities only.
std::vector<double> PredictPresence(const SemanticGroupingNet &model, const Frontend &frontend,
                                    const dsp::Waveform &mixture);

}  // namespace sgn::model
