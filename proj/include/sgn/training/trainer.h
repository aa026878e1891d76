// Copyright 2026 The SGN Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "sgn/data/dataset.h"
#include "sgn/model/pipeline.h"
#include "sgn/model/sgn.h"

namespace sgn::train {

struct TrainConfig {
  double lr = 0.001;
  double momentum = 0.9;
  std::size_t batch_size = 16;
  std::size_t epochs = 60;
  std::uint64_t seed = 7;
  double mask_threshold_ratio = 0.5;
  // Epochs between intermediate checkpoints; 0 writes only the final one.
  std::size_t save_interval = 0;

  void Validate() const;
  std::string ToText() const;
  // key=value lines; '#' starts a comment. Unknown keys are an error.
  static TrainConfig FromText(const std::string &text);
  void Set(const std::string &key, const std::string &value);

  bool operator==(const TrainConfig &) const = default;
};

// One precomputed training example: network input plus loss targets.
struct Example {
  ad::Tensor input;  // [1 x grid x grid]
  std::vector<std::size_t> class_ids;
  std::vector<double> presence;
  model::MaskSet targets;
};

Example MakeExample(const data::MixtureSample &sample, const model::Frontend &frontend,
                    double mask_threshold_ratio);

// How single-source WAV pool entries are paired into mixtures.
struct WavPairing {
  std::size_t sources = 2;
  std::size_t count = 0;  // 0: one mixture per pool entry in the split
  std::uint64_t seed = 0;
};

// Realizes every entry of `split`; WAV pools are paired first.
std::vector<data::MixtureSample> LoadSplit(const data::DatasetManifest &manifest, const std::string &split,
                                           std::size_t clip_length, const WavPairing &pairing = {});

struct EpochMetrics {
  std::size_t epoch = 0;
  double loss_total = 0;
  double loss_rec = 0;
  double loss_group = 0;
  double token_precision = 0;
  double token_recall = 0;
  double token_f1 = 0;
  double multilabel_f1 = 0;
};

inline constexpr const char *kMetricsHeader =
    "epoch,loss_total,loss_rec,loss_group,token_precision,token_recall,token_f1,multilabel_f1";
std::string FormatMetricsRow(const EpochMetrics &m);

// Streaming confusion counts for the token classifier (macro P/R/F1 over
// classes) and presence prediction (micro F1 at p > 0.5).
class ClassificationTally {
 public:
  explicit ClassificationTally(std::size_t classes);
  // token_logits: [C x C]; row i should predict class i.
  void AddTokens(std::span<const double> token_logits);
  void AddPresence(std::span<const double> presence_logits, std::span<const double> truth);

  double TokenPrecision() const;
  double TokenRecall() const;
  double TokenF1() const;
  double MultilabelF1() const;

 private:
  std::size_t classes_;
  std::vector<double> tp_, fp_, fn_;
  double ml_tp_ = 0, ml_fp_ = 0, ml_fn_ = 0;
};

struct FitOptions {
  std::filesystem::path metrics_csv;  // empty: no log file
  std::filesystem::path checkpoint;   // empty: no checkpoints
  std::function<void(const EpochMetrics &)> on_epoch;
};

// Shuffled mini-batch SGD with momentum over the precomputed examples.
// Throws NonFiniteError naming the epoch, batch and loss term on a NaN/Inf.
std::vector<EpochMetrics> Fit(model::SemanticGroupingNet &net, const std::vector<Example> &examples,
                              const TrainConfig &cfg, const FitOptions &options = {});

}  // namespace sgn::train
