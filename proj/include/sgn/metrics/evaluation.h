// Copyright 2026 The SGN Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Scoring separation runs: trained model, ideal-binary-mask oracle and the
// mixture-as-estimate baseline.

#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "sgn/data/dataset.h"
#include "sgn/model/pipeline.h"
#include "sgn/model/sgn.h"

namespace sgn::metrics {

struct SourceScore {
  std::size_t sample_id = 0;
  std::size_t source_index = 0;
  std::size_t class_id = 0;
  double si_sdr = 0;
  double sdr = 0;
  double sir = 0;
  double sar = 0;
};

// Scores estimates[k] against sample.sources[k] (both fitted to `length`).
std::vector<SourceScore> ScoreSources(const data::MixtureSample &sample,
                                      const std::vector<dsp::Waveform> &estimates, std::size_t sample_id,
                                      std::size_t length);

// Ground-truth binary masks applied to the mixture and resynthesized.
std::vector<dsp::Waveform> IdealBinaryMaskEstimates(const data::MixtureSample &sample,
                                                    const model::Frontend &frontend, double ratio = 0.5);

// The clipped mixture, once per source.
std::vector<dsp::Waveform> BaselineEstimates(const data::MixtureSample &sample, const model::Frontend &frontend);

enum class Method { kModel, kOracleIbm, kBaseline };
enum class ClassSource { kGroundTruth, kTopK, kThreshold };

struct EvalOptions {
  Method method = Method::kModel;
  ClassSource classes = ClassSource::kGroundTruth;
  std::size_t topk = 1;
  double threshold = 0.5;
  bool binarize = false;
  bool skip_bad = false;
  double mask_threshold_ratio = 0.5;
};

// Pairs model outputs with references when classes are predicted: a
// reference takes the estimate of its own class if one was produced;
// remaining references take the remaining estimates in class order; a
// reference left without an estimate is scored against silence.
std::vector<dsp::Waveform> MatchEstimates(const std::vector<std::size_t> &reference_ids,
                                          const std::vector<std::size_t> &estimate_ids,
                                          const std::vector<dsp::Waveform> &estimates, std::size_t length);

struct EvalResult {
  std::vector<SourceScore> rows;
  std::size_t samples = 0;
  std::size_t skipped = 0;
  double mean_si_sdr = 0;
  double mean_sdr = 0;
  double mean_sir = 0;
  double mean_sar = 0;
};

// `load(i)` realizes sample i of `count`. With skip_bad, samples whose
// loading throws sgn::Error are counted and skipped; otherwise the error
// propagates. `model` may be null for the oracle and baseline methods.
EvalResult Evaluate(const model::SemanticGroupingNet *model, const model::Frontend &frontend,
                    std::size_t count, const std::function<data::MixtureSample(std::size_t)> &load,
                    const EvalOptions &options);

inline constexpr const char *kEvalHeader = "sample_id,source_index,class_id,si_sdr,sdr,sir,sar";
void WriteEvalCsv(const EvalResult &result, const std::filesystem::path &path);

}  // namespace sgn::metrics
