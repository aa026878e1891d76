// Copyright 2026 The SGN Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sgn/dsp/warp.h"

#include <cmath>
#include <string>

#include "sgn/common/error.h"

namespace sgn::dsp {

namespace {
constexpr double kMinBin = 2.0;
}

LogFrequencyWarp::LogFrequencyWarp(std::size_t linear_bins, std::size_t log_bins)
    : linear_bins_(linear_bins), log_bins_(log_bins) {
  if (linear_bins_ < 4) throw DomainError("warp needs at least 4 linear bins");
  if (log_bins_ < 2) throw DomainError("warp needs at least 2 log bins");
  const double top = static_cast<double>(linear_bins_ - 1);
  const double span = std::log(top / kMinBin);

  warp_taps_.resize(log_bins_);
  for (std::size_t j = 0; j < log_bins_; ++j) {
    const double f = SamplePoint(j);
    std::size_t lo = static_cast<std::size_t>(std::floor(f));
    double frac = f - lo;
    if (lo >= linear_bins_ - 1) {
      lo = linear_bins_ - 2;
      frac = 1.0;
    }
    warp_taps_[j] = {lo, frac};
  }

  unwarp_taps_.resize(linear_bins_);
  for (std::size_t k = 0; k < linear_bins_; ++k) {
    double pos = 0.0;
    if (k > kMinBin) pos = (log_bins_ - 1) * std::log(k / kMinBin) / span;
    std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    double frac = pos - lo;
    if (lo >= log_bins_ - 1) {
      lo = log_bins_ - 2;
      frac = 1.0;
    }
    unwarp_taps_[k] = {lo, frac};
  }
}

double LogFrequencyWarp::SamplePoint(std::size_t j) const {
  if (j == log_bins_ - 1) return static_cast<double>(linear_bins_ - 1);
  const double top = static_cast<double>(linear_bins_ - 1);
  return kMinBin * std::pow(top / kMinBin, static_cast<double>(j) / (log_bins_ - 1));
}

Grid LogFrequencyWarp::Apply(const std::vector<Tap> &taps, const Grid &in, std::size_t in_rows) {
  if (static_cast<std::size_t>(in.rows()) != in_rows) {
    throw DimensionError("warp expects " + std::to_string(in_rows) + " rows, got " +
                         std::to_string(in.rows()));
  }
  Grid out(static_cast<Eigen::Index>(taps.size()), in.cols());
  for (std::size_t r = 0; r < taps.size(); ++r) {
    const auto [lo, frac] = taps[r];
    out.row(r) = (1.0 - frac) * in.row(lo) + frac * in.row(lo + 1);
  }
  return out;
}

Grid LogFrequencyWarp::Warp(const Grid &linear) const {
  return Apply(warp_taps_, linear, linear_bins_);
}

Grid LogFrequencyWarp::Unwarp(const Grid &warped) const {
  return Apply(unwarp_taps_, warped, log_bins_);
}

Eigen::MatrixXd LogFrequencyWarp::WarpMatrix() const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(log_bins_, linear_bins_);
  for (std::size_t j = 0; j < log_bins_; ++j) {
    m(j, warp_taps_[j].lo) += 1.0 - warp_taps_[j].frac;
    m(j, warp_taps_[j].lo + 1) += warp_taps_[j].frac;
  }
  return m;
}

Eigen::MatrixXd LogFrequencyWarp::UnwarpMatrix() const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(linear_bins_, log_bins_);
  for (std::size_t k = 0; k < linear_bins_; ++k) {
    m(k, unwarp_taps_[k].lo) += 1.0 - unwarp_taps_[k].frac;
    m(k, unwarp_taps_[k].lo + 1) += unwarp_taps_[k].frac;
  }
  return m;
}

Spectrogram Analyze(const Stft &stft, const LogFrequencyWarp &warp, const Waveform &w) {
  Spectrogram s = stft.Forward(w);
  s.warped = warp.Warp(s.magnitude);
  return s;
}

}  // namespace sgn::dsp
