// Copyright 2026 The SGN Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sgn/dsp/stft.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "sgn/common/error.h"

namespace sgn::dsp {

Stft::Stft(std::size_t frames, StftParams params) : params_(params), frames_(frames) {
  if (params_.window < 4 || params_.window % 2 != 0) {
    throw DomainError("stft window must be even and >= 4");
  }
  if (params_.hop == 0 || params_.hop > params_.window / 2) {
    throw DomainError("stft hop must be in [1, window / 2]");
  }
  if (frames_ == 0) throw DomainError("stft needs at least one frame");
  const std::size_t n = params_.window, k = params_.bins();
  auto window = std::make_shared<std::vector<double>>(n);
  for (std::size_t i = 0; i < n; ++i) {
    (*window)[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
  }
  auto c = std::make_shared<Eigen::MatrixXd>(n, k);
  auto s = std::make_shared<Eigen::MatrixXd>(n, k);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      // Reduce the phase index mod n before scaling to keep it exact.
      const double phase = 2.0 * std::numbers::pi * static_cast<double>((i * j) % n) / n;
      (*c)(i, j) = std::cos(phase);
      (*s)(i, j) = std::sin(phase);
    }
  }
  window_ = std::move(window);
  cos_ = std::move(c);
  sin_ = std::move(s);
}

std::vector<double> Stft::FitClip(const Waveform &w) const {
  Validate(w);
  if (w.sample_rate_hz != params_.sample_rate_hz) {
    throw DomainError("stft expects " + std::to_string(params_.sample_rate_hz) +
                      " Hz audio, got " + std::to_string(w.sample_rate_hz) +
                      " Hz; resample first");
  }
  if (w.size() < params_.window) {
    throw DomainError("waveform has " + std::to_string(w.size()) +
                      " samples, fewer than one stft window (" +
                      std::to_string(params_.window) + ")");
  }
  const std::size_t len = clip_length();
  std::vector<double> clip(len, 0.0);
  if (w.size() <= len) {
    std::copy(w.samples.begin(), w.samples.end(), clip.begin());
  } else {
    const std::size_t start = (w.size() - len) / 2;
    std::copy_n(w.samples.begin() + static_cast<std::ptrdiff_t>(start), len, clip.begin());
  }
  return clip;
}

Spectrogram Stft::Forward(const Waveform &w) const {
  const std::vector<double> clip = FitClip(w);
  const std::size_t n = params_.window, hop = params_.hop, pad = padding();
  const auto &win = *window_;
  Eigen::MatrixXd framed(frames_, n);
  for (std::size_t t = 0; t < frames_; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      // Position inside the padded buffer is t * hop + i.
      const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t * hop + i) -
                                 static_cast<std::ptrdiff_t>(pad);
      const double x = (src >= 0 && src < static_cast<std::ptrdiff_t>(clip.size())) ? clip[src] : 0.0;
      framed(t, i) = win[i] * x;
    }
  }
  Spectrogram s;
  s.real = (framed * *cos_).transpose();
  s.imag = -(framed * *sin_).transpose();
  s.magnitude = (s.real.array().square() + s.imag.array().square()).sqrt().matrix();
  return s;
}

Waveform Stft::Inverse(const Grid &real, const Grid &imag, std::size_t length) const {
  const std::size_t n = params_.window, hop = params_.hop, k = bins(), pad = padding();
  if (static_cast<std::size_t>(real.rows()) != k || static_cast<std::size_t>(real.cols()) != frames_ ||
      real.rows() != imag.rows() || real.cols() != imag.cols()) {
    throw DimensionError("istft expects [" + std::to_string(k) + "x" + std::to_string(frames_) +
                         "] grids, got [" + std::to_string(real.rows()) + "x" +
                         std::to_string(real.cols()) + "] and [" + std::to_string(imag.rows()) +
                         "x" + std::to_string(imag.cols()) + "]");
  }
  // Real-signal inverse DFT: interior bins count twice, DC and Nyquist once.
  Eigen::VectorXd weight = Eigen::VectorXd::Constant(k, 2.0 / n);
  weight(0) = 1.0 / n;
  weight(k - 1) = 1.0 / n;
  const Eigen::MatrixXd re = weight.asDiagonal() * real;
  const Eigen::MatrixXd im = weight.asDiagonal() * imag;
  const Eigen::MatrixXd frames = *cos_ * re - *sin_ * im;  // [n x frames]

  const auto &win = *window_;
  const std::size_t padded = (frames_ - 1) * hop + n;
  std::vector<double> acc(padded, 0.0), norm(padded, 0.0);
  for (std::size_t t = 0; t < frames_; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      acc[t * hop + i] += win[i] * frames(i, t);
      norm[t * hop + i] += win[i] * win[i];
    }
  }
  Waveform out;
  out.sample_rate_hz = params_.sample_rate_hz;
  out.samples.assign(length, 0.0);
  const std::size_t avail = std::min(length, clip_length());
  for (std::size_t i = 0; i < avail; ++i) {
    out.samples[i] = acc[i + pad] / std::max(norm[i + pad], 1e-10);
  }
  return out;
}

}  // namespace sgn::dsp
