// Copyright 2026 The SGN Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <memory>

#include "sgn/dsp/audio.h"

namespace sgn::dsp {

struct StftParams {
  std::size_t window = 1022;
  std::size_t hop = 256;
  int sample_rate_hz = kSampleRate;

  std::size_t bins() const { return window / 2 + 1; }
};

struct Spectrogram {
  Grid real;       // [bins x frames]
  Grid imag;
  Grid magnitude;
  Grid warped;     // [F_log x frames]; empty unless a warp was applied
};

// Short-time Fourier transform with a periodic Hann window and a direct DFT
// at the exact window size. The clip is padded by (window - hop) / 2 zeros
// on each side, so a clip of frames * hop samples yields exactly `frames`
// frames and every clip sample is covered by at least two windows.
class Stft {
 public:
  explicit Stft(std::size_t frames, StftParams params = {});

  const StftParams &params() const { return params_; }
  std::size_t frames() const { return frames_; }
  std::size_t bins() const { return params_.bins(); }
  std::size_t clip_length() const { return frames_ * params_.hop; }
  std::size_t padding() const { return (params_.window - params_.hop) / 2; }
  const std::vector<double> &window() const { return *window_; }

  // Fits a waveform to clip_length(): shorter clips are zero-padded at the
  // end, longer ones center-cropped. Throws DomainError if the rate differs
  // from params().sample_rate_hz or the waveform is shorter than one window.
  std::vector<double> FitClip(const Waveform &w) const;

  // Real and imaginary parts plus magnitude; `warped` is left empty.
  Spectrogram Forward(const Waveform &w) const;
  // Weighted overlap-add with window-sum normalization, cropped or
  // zero-padded to `length` samples.
  Waveform Inverse(const Grid &real, const Grid &imag, std::size_t length) const;

 private:
  StftParams params_;
  std::size_t frames_;
  std::shared_ptr<const std::vector<double>> window_;
  std::shared_ptr<const Eigen::MatrixXd> cos_;  // [window x bins]
  std::shared_ptr<const Eigen::MatrixXd> sin_;
};

}  // namespace sgn::dsp
