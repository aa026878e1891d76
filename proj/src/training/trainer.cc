// Copyright 2026 The SGN Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sgn/training/trainer.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "sgn/autodiff/ops.h"
#include "sgn/common/error.h"
#include "sgn/common/key_value.h"
#include "sgn/training/checkpoint.h"
#include "sgn/training/losses.h"

namespace sgn::train {

void TrainConfig::Validate() const {
  auto fail = [](const std::string &m) { throw DomainError("invalid training config: " + m); };
  if (!(lr >= 0) || !std::isfinite(lr)) fail("lr must be a finite non-negative number");
  if (!(momentum >= 0 && momentum < 1)) fail("momentum must lie in [0, 1)");
  if (batch_size == 0) fail("batch_size must be positive");
  if (!(mask_threshold_ratio > 0)) fail("mask_threshold_ratio must be positive");
}

std::string TrainConfig::ToText() const {
  std::ostringstream os;
  os.precision(17);
  os << "lr=" << lr << "\n"
     << "momentum=" << momentum << "\n"
     << "batch_size=" << batch_size << "\n"
     << "epochs=" << epochs << "\n"
     << "seed=" << seed << "\n"
     << "mask_threshold_ratio=" << mask_threshold_ratio << "\n"
     << "save_interval=" << save_interval << "\n";
  return os.str();
}

void TrainConfig::Set(const std::string &raw_key, const std::string &raw_value) {
  const std::string key = Trim(raw_key), v = Trim(raw_value);
  if (key == "lr") lr = ParseDouble(key, v);
  else if (key == "momentum") momentum = ParseDouble(key, v);
  else if (key == "batch_size") batch_size = ParseUnsigned(key, v);
  else if (key == "epochs") epochs = ParseUnsigned(key, v);
  else if (key == "seed") seed = ParseUnsigned<std::uint64_t>(key, v);
  else if (key == "mask_threshold_ratio") mask_threshold_ratio = ParseDouble(key, v);
  else if (key == "save_interval") save_interval = ParseUnsigned(key, v);
  else throw DomainError("unknown training config key '" + key + "'");
}

TrainConfig TrainConfig::FromText(const std::string &text) {
  TrainConfig c;
  ForEachKeyValue(text, [&](const std::string &k, const std::string &v) { c.Set(k, v); });
  c.Validate();
  return c;
}

Example MakeExample(const data::MixtureSample &sample, const model::Frontend &frontend,
                    double mask_threshold_ratio) {
  Example e;
  e.input = model::PrepareInput(frontend.Analyze(sample.mixture).warped);
  e.class_ids = sample.class_ids;
  e.presence = sample.presence;
  e.targets = ComputeMaskTargets(sample, frontend, mask_threshold_ratio);
  return e;
}

std::vector<data::MixtureSample> LoadSplit(const data::DatasetManifest &manifest, const std::string &split,
                                           std::size_t clip_length, const WavPairing &pairing) {
  std::vector<data::ManifestEntry> paired;
  std::vector<const data::ManifestEntry *> entries;
  if (manifest.kind == data::DatasetManifest::Kind::kWavPool) {
    const std::size_t count = pairing.count ? pairing.count : manifest.Split(split).size();
    paired = data::PairWavEntries(manifest, split, count, pairing.sources, pairing.seed);
    for (const auto &e : paired) entries.push_back(&e);
  } else {
    entries = manifest.Split(split);
  }
  std::vector<data::MixtureSample> out;
  out.reserve(entries.size());
  for (const auto *e : entries) out.push_back(data::Realize(manifest, *e, clip_length));
  return out;
}

std::string FormatMetricsRow(const EpochMetrics &m) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%zu,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g", m.epoch, m.loss_total,
                m.loss_rec, m.loss_group, m.token_precision, m.token_recall, m.token_f1, m.multilabel_f1);
  return buf;
}

ClassificationTally::ClassificationTally(std::size_t classes)
    : classes_(classes), tp_(classes, 0), fp_(classes, 0), fn_(classes, 0) {}

void ClassificationTally::AddTokens(std::span<const double> logits) {
  if (logits.size() != classes_ * classes_) throw DimensionError("token logits must be C x C");
  for (std::size_t i = 0; i < classes_; ++i) {
    const auto row = logits.subspan(i * classes_, classes_);
    const auto pred = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    if (pred == i) {
      ++tp_[i];
    } else {
      ++fp_[pred];
      ++fn_[i];
    }
  }
}

void ClassificationTally::AddPresence(std::span<const double> logits, std::span<const double> truth) {
  if (logits.size() != truth.size()) throw DimensionError("presence logits and labels differ in size");
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const bool pred = logits[i] > 0.0;  // sigmoid > 0.5
    const bool real = truth[i] > 0.5;
    ml_tp_ += pred && real;
    ml_fp_ += pred && !real;
    ml_fn_ += !pred && real;
  }
}

namespace {

double Ratio(double num, double den) { return den > 0 ? num / den : 0.0; }
double F1(double p, double r) { return p + r > 0 ? 2 * p * r / (p + r) : 0.0; }

}  // namespace

double ClassificationTally::TokenPrecision() const {
  double s = 0;
  for (std::size_t c = 0; c < classes_; ++c) s += Ratio(tp_[c], tp_[c] + fp_[c]);
  return s / classes_;
}

double ClassificationTally::TokenRecall() const {
  double s = 0;
  for (std::size_t c = 0; c < classes_; ++c) s += Ratio(tp_[c], tp_[c] + fn_[c]);
  return s / classes_;
}

double ClassificationTally::TokenF1() const {
  double s = 0;
  for (std::size_t c = 0; c < classes_; ++c) {
    s += F1(Ratio(tp_[c], tp_[c] + fp_[c]), Ratio(tp_[c], tp_[c] + fn_[c]));
  }
  return s / classes_;
}

double ClassificationTally::MultilabelF1() const {
  return F1(Ratio(ml_tp_, ml_tp_ + ml_fp_), Ratio(ml_tp_, ml_tp_ + ml_fn_));
}

std::vector<EpochMetrics> Fit(model::SemanticGroupingNet &net, const std::vector<Example> &examples,
                              const TrainConfig &cfg, const FitOptions &options) {
  cfg.Validate();
  if (examples.empty()) throw DomainError("training set is empty");
  const auto &mc = net.config();
  for (const auto &e : examples) {
    if (e.input.shape() != ad::Shape{1, mc.grid, mc.grid} || e.presence.size() != mc.classes) {
      throw DimensionError("training examples do not match the model geometry");
    }
  }

  std::ofstream csv;
  if (!options.metrics_csv.empty()) {
    csv.open(options.metrics_csv, std::ios::binary);
    if (!csv) throw Error("cannot write metrics log '" + options.metrics_csv.string() + "'");
    csv << kMetricsHeader << "\n";
  }

  std::mt19937_64 shuffle_rng(cfg.seed);
  std::mt19937_64 noise_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  const auto trainable = net.Trainable();
  const bool with_tokens = mc.use_sct;

  std::vector<EpochMetrics> log;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    ClassificationTally tally(mc.classes);
    EpochMetrics m;
    m.epoch = epoch;
    for (std::size_t start = 0, batch = 1; start < order.size(); start += cfg.batch_size, ++batch) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const double scale = 1.0 / static_cast<double>(end - start);
      for (std::size_t k = start; k < end; ++k) {
        const Example &ex = examples[order[k]];
        const char *term = "forward";
        try {
          const auto r = net.Forward(ex.input, ex.class_ids, &noise_rng);
          term = "reconstruction";
          const Tensor rec = ReconstructionLoss(r.mask_logits, r.class_ids, ex.targets);
          term = "grouping";
          const Tensor group = GroupingLoss(r.token_logits, r.presence_logits, ex.presence, with_tokens);
          term = "total";
          const Tensor total = ad::Add(rec, group);
          term = "backward";
          ad::Backward(ad::Scale(total, scale));
          m.loss_rec += rec.item();
          m.loss_group += group.item();
          m.loss_total += total.item();
          tally.AddTokens(r.token_logits.data());
          tally.AddPresence(r.presence_logits.data(), ex.presence);
        } catch (const NonFiniteError &err) {
          throw NonFiniteError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                               std::to_string(batch) + ", term '" + term + "': " + err.what());
        }
      }
      ad::SgdStep(trainable, cfg.lr, cfg.momentum);
      // Frozen parameters still collect gradients; drop them.
      net.parameters().ZeroGrad();
    }
    const double n = static_cast<double>(examples.size());
    m.loss_total /= n;
    m.loss_rec /= n;
    m.loss_group /= n;
    m.token_precision = tally.TokenPrecision();
    m.token_recall = tally.TokenRecall();
    m.token_f1 = tally.TokenF1();
    m.multilabel_f1 = tally.MultilabelF1();
    log.push_back(m);
    if (csv.is_open()) {
      csv << FormatMetricsRow(m) << "\n";
      csv.flush();
    }
    if (options.on_epoch) options.on_epoch(m);
    if (!options.checkpoint.empty() && cfg.save_interval && epoch % cfg.save_interval == 0 &&
        epoch != cfg.epochs) {
      SaveCheckpoint(net, options.checkpoint);
    }
  }
  if (!options.checkpoint.empty()) SaveCheckpoint(net, options.checkpoint);
  return log;
}

}  // namespace sgn::train
