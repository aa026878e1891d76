// Copyright 2026 The SGN Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <vector>

#include "sgn/dsp/audio.h"
#include "sgn/dsp/stft.h"

namespace sgn::dsp {

// Fixed resampling of the linear frequency axis onto log-spaced bins.
//
// Log bin j samples linear position f_j = 2 * (L / 2)^(j / (F_log - 1)),
// L = F_lin - 1, with linear interpolation between neighbouring linear bins.
// The unwarp goes the other way: linear bin k interpolates the log grid at
// its own log position (bins below 2 clamp to log bin 0). Both operators are
// row-stochastic two-tap interpolators.
class LogFrequencyWarp {
 public:
  LogFrequencyWarp(std::size_t linear_bins, std::size_t log_bins);

  std::size_t linear_bins() const { return linear_bins_; }
  std::size_t log_bins() const { return log_bins_; }

  Grid Warp(const Grid &linear) const;    // [F_lin x T] -> [F_log x T]
  Grid Unwarp(const Grid &warped) const;  // [F_log x T] -> [F_lin x T]

  // Dense forms of the two operators.
  Eigen::MatrixXd WarpMatrix() const;    // [F_log x F_lin]
  Eigen::MatrixXd UnwarpMatrix() const;  // [F_lin x F_log]

  // Linear-bin position sampled by log bin j.
  double SamplePoint(std::size_t j) const;

 private:
  struct Tap {
    std::size_t lo;
    double frac;  // weight of lo + 1
  };
  static Grid Apply(const std::vector<Tap> &taps, const Grid &in, std::size_t in_rows);

  std::size_t linear_bins_;
  std::size_t log_bins_;
  std::vector<Tap> warp_taps_;
  std::vector<Tap> unwarp_taps_;
};

// Forward STFT with the warped magnitude populated.
Spectrogram Analyze(const Stft &stft, const LogFrequencyWarp &warp, const Waveform &w);

}  // namespace sgn::dsp
