// Copyright 2026 The SGN Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <span>
#include <vector>

#include "sgn/dsp/audio.h"

namespace sgn::metrics {

// Infinite ratios are reported as +/- this many dB.
inline constexpr double kDbCap = 200.0;

// 10 log10(num / den), clamped to [-kDbCap, kDbCap]; den == 0 gives +cap.
double RatioDb(double num, double den);

// Scale-invariant SDR. Throws DimensionError on length mismatch and
// DomainError on an all-zero reference.
double SiSdr(std::span<const double> estimate, std::span<const double> reference);
double SiSdr(const dsp::Waveform &estimate, const dsp::Waveform &reference);

struct BssDecomposition {
  std::vector<double> target;  // projection onto the target reference
  std::vector<double> interf;  // projection onto all references minus target
  std::vector<double> artif;   // the rest
};

struct BssScores {
  double sdr = 0;
  double sir = 0;
  double sar = 0;
};

// Zero-lag projections. Throws DomainError when the references are
// linearly dependent (numerical rank below their count).
BssDecomposition Decompose(std::span<const double> estimate,
                           const std::vector<std::span<const double>> &references, std::size_t target);
BssScores BssEval(std::span<const double> estimate, const std::vector<std::span<const double>> &references,
                  std::size_t target);
BssScores BssEval(const dsp::Waveform &estimate, const std::vector<dsp::Waveform> &references,
                  std::size_t target);

}  // namespace sgn::metrics
