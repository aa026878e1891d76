// Copyright 2026 The SGN Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Synthetic class-conditional sources, mixtures and dataset manifests.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sgn/dsp/audio.h"

namespace sgn::data {

enum class FamilyKind { kHarmonicStack, kPureToneBand, kBandpassNoise, kLinearChirp, kAmTone };

const char *FamilyKindName(FamilyKind kind);

struct SourceFamily {
  std::size_t class_id = 0;
  FamilyKind kind = FamilyKind::kPureToneBand;
  // Meaning depends on kind: fundamental range (harmonic stack), tone or
  // carrier range (tone band, AM tone), pass band (noise), start range
  // (chirp).
  double lo_hz = 0;
  double hi_hz = 0;
  // Chirp end-frequency range, AM modulation-rate range.
  double aux_lo = 0;
  double aux_hi = 0;

  // Frequency band that holds the bulk of the family's energy.
  std::pair<double, double> Band() const;
};

// The first four classes are a harmonic stack (110-220 Hz fundamentals),
// a 500-900 Hz tone, 1.5-3 kHz noise and a 300 -> 2500 Hz chirp; class 4 is
// an AM tone; further classes alternate tones and AM tones in narrow bands
// above 4 kHz.
std::vector<SourceFamily> DefaultFamilies(std::size_t classes);

// Deterministic in (family, seed, length); peak-normalized to 0.5.
dsp::Waveform SynthSource(const SourceFamily &family, std::uint64_t seed, std::size_t length,
                          int sample_rate_hz = dsp::kSampleRate);

struct MixtureSample {
  dsp::Waveform mixture;
  std::vector<dsp::Waveform> sources;  // already scaled by the mixing gain
  std::vector<std::size_t> class_ids;
  std::vector<double> presence;        // multi-hot over all classes
};

inline constexpr double kMixGain = 0.5;

// Scales each source by kMixGain, sums, and clips the sum to [-1, 1].
// Throws DomainError on duplicate classes or mismatched lengths/rates.
MixtureSample MakeMixture(std::span<const dsp::Waveform> sources,
                          std::span<const std::size_t> class_ids, std::size_t classes);

// One manifest line. A synthetic entry carries generation seeds, a WAV
// entry carries file paths (relative to the manifest root). For WAV pools
// every entry is a single labelled source.
struct ManifestEntry {
  std::string split;
  std::vector<std::size_t> class_ids;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> paths;
};

struct DatasetManifest {
  enum class Kind { kSynthetic, kWavPool };
  Kind kind = Kind::kSynthetic;
  int version = 1;
  std::size_t classes = 0;
  std::size_t sources_per_mixture = 0;
  std::size_t frames = 0;
  std::filesystem::path root;
  std::vector<std::string> class_names;
  std::vector<ManifestEntry> entries;

  std::vector<const ManifestEntry *> Split(const std::string &split) const;
};

struct SplitSizes {
  std::size_t train = 512;
  std::size_t val = 64;
  std::size_t test = 64;
};

// Each entry draws `sources` distinct classes uniformly; per-source seeds
// come from `seed`. When train >= 4 * classes, draws are repeated until every
// class appears in the training split.
DatasetManifest BuildDataset(std::size_t classes, const SplitSizes &sizes, std::size_t sources,
                             std::uint64_t seed, std::size_t frames);

void WriteManifest(const DatasetManifest &m, const std::filesystem::path &path);
// Relative WAV paths are resolved against the manifest's directory.
DatasetManifest ReadManifest(const std::filesystem::path &path);

struct WavScan {
  DatasetManifest manifest;
  std::size_t warnings = 0;  // skipped non-WAV or unreadable files
};

// root/<class_name>/*.wav, classes numbered by sorted directory name.
WavScan LoadWavDataset(const std::filesystem::path &root, std::size_t frames);

// Pairs single-source WAV pool entries of `split` into `count` mixtures of
// `sources` distinct classes.
std::vector<ManifestEntry> PairWavEntries(const DatasetManifest &pool, const std::string &split,
                                          std::size_t count, std::size_t sources,
                                          std::uint64_t seed);

// Synthesizes or loads the sources of an entry and mixes them. WAV sources
// are resampled, fitted to `length` samples (zero-pad or center-crop) and
// peak-normalized to 0.5.
MixtureSample Realize(const DatasetManifest &m, const ManifestEntry &entry, std::size_t length);

}  // namespace sgn::data
