// Copyright 2026 The SGN Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

namespace sgn::dsp {

inline constexpr int kSampleRate = 11025;

// Time-frequency grids are row-major so that a [F x T] grid has the same
// memory layout as a [1 x F x T] tensor.
using Grid = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Waveform {
  std::vector<double> samples;
  int sample_rate_hz = kSampleRate;

  std::size_t size() const { return samples.size(); }
};

// Throws DomainError when the waveform is empty, has a non-positive rate or
// holds non-finite samples.
void Validate(const Waveform &w);

// Scales so that max |sample| == peak. An all-zero waveform is returned as is.
Waveform PeakNormalize(const Waveform &w, double peak = 1.0);

// 16-bit PCM RIFF/WAVE, mono or stereo. Stereo is averaged to mono.
// Throws FormatError (with byte offset) on malformed or unsupported input.
Waveform LoadWav(const std::filesystem::path &path);
// Clamps to [-1, 1] and rounds half away from zero.
void SaveWav(const Waveform &w, const std::filesystem::path &path);

// Linear interpolation resampling; output length is floor(n * target / rate).
Waveform ResampleLinear(const Waveform &w, int target_hz);

// Binary PGM of log(1 + grid), scaled to [0, 255], row 0 = highest bin.
void SavePgm(const Grid &magnitude, const std::filesystem::path &path);

}  // namespace sgn::dsp
