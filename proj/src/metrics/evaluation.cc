// Copyright 2026 The SGN Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sgn/metrics/evaluation.h"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "sgn/common/error.h"
#include "sgn/metrics/metrics.h"
#include "sgn/training/losses.h"

namespace sgn::metrics {

namespace {

dsp::Waveform Fit(const dsp::Waveform &w, std::size_t length) {
  dsp::Waveform out;
  out.sample_rate_hz = w.sample_rate_hz;
  out.samples.assign(length, 0.0);
  if (w.size() <= length) {
    std::copy(w.samples.begin(), w.samples.end(), out.samples.begin());
  } else {
    const auto start = static_cast<std::ptrdiff_t>((w.size() - length) / 2);
    std::copy_n(w.samples.begin() + start, length, out.samples.begin());
  }
  return out;
}

}  // namespace

std::vector<SourceScore> ScoreSources(const data::MixtureSample &sample,
                                      const std::vector<dsp::Waveform> &estimates, std::size_t sample_id,
                                      std::size_t length) {
  if (estimates.size() != sample.sources.size()) {
    throw DimensionError("got " + std::to_string(estimates.size()) + " estimates for " +
                         std::to_string(sample.sources.size()) + " sources");
  }
  std::vector<dsp::Waveform> refs;
  for (const auto &s : sample.sources) refs.push_back(Fit(s, length));
  std::vector<SourceScore> out;
  for (std::size_t k = 0; k < refs.size(); ++k) {
    const dsp::Waveform est = Fit(estimates[k], length);
    SourceScore s;
    s.sample_id = sample_id;
    s.source_index = k;
    s.class_id = sample.class_ids[k];
    s.si_sdr = SiSdr(est, refs[k]);
    const BssScores b = BssEval(est, refs, k);
    s.sdr = b.sdr;
    s.sir = b.sir;
    s.sar = b.sar;
    out.push_back(s);
  }
  return out;
}

std::vector<dsp::Waveform> IdealBinaryMaskEstimates(const data::MixtureSample &sample,
                                                    const model::Frontend &frontend, double ratio) {
  const model::MaskSet masks = train::ComputeMaskTargets(sample, frontend, ratio);
  return frontend.Resynthesize(frontend.Analyze(sample.mixture), masks, frontend.clip_length());
}

std::vector<dsp::Waveform> BaselineEstimates(const data::MixtureSample &sample, const model::Frontend &frontend) {
  return std::vector<dsp::Waveform>(sample.sources.size(), Fit(sample.mixture, frontend.clip_length()));
}

std::vector<dsp::Waveform> MatchEstimates(const std::vector<std::size_t> &reference_ids,
                                          const std::vector<std::size_t> &estimate_ids,
                                          const std::vector<dsp::Waveform> &estimates, std::size_t length) {
  if (estimate_ids.size() != estimates.size()) throw DimensionError("estimate ids and estimates differ in count");
  std::vector<bool> used(estimates.size(), false);
  std::vector<int> pick(reference_ids.size(), -1);
  for (std::size_t r = 0; r < reference_ids.size(); ++r) {
    const auto it = std::find(estimate_ids.begin(), estimate_ids.end(), reference_ids[r]);
    if (it != estimate_ids.end()) {
      pick[r] = static_cast<int>(it - estimate_ids.begin());
      used[pick[r]] = true;
    }
  }
  std::size_t next = 0;
  for (std::size_t r = 0; r < reference_ids.size(); ++r) {
    if (pick[r] >= 0) continue;
    while (next < used.size() && used[next]) ++next;
    if (next < used.size()) {
      pick[r] = static_cast<int>(next);
      used[next] = true;
    }
  }
  std::vector<dsp::Waveform> out;
  for (std::size_t r = 0; r < reference_ids.size(); ++r) {
    if (pick[r] >= 0) {
      out.push_back(Fit(estimates[pick[r]], length));
    } else {
      dsp::Waveform silent;
      silent.samples.assign(length, 0.0);
      out.push_back(silent);
    }
  }
  return out;
}

EvalResult Evaluate(const model::SemanticGroupingNet *model, const model::Frontend &frontend, std::size_t count,
                    const std::function<data::MixtureSample(std::size_t)> &load, const EvalOptions &options) {
  if (options.method == Method::kModel && model == nullptr) throw DomainError("model evaluation needs a model");
  EvalResult result;
  const std::size_t length = frontend.clip_length();
  for (std::size_t i = 0; i < count; ++i) {
    data::MixtureSample sample;
    try {
      sample = load(i);
    } catch (const Error &) {
      if (!options.skip_bad) throw;
      ++result.skipped;
      continue;
    }
    std::vector<dsp::Waveform> estimates;
    switch (options.method) {
      case Method::kBaseline:
        estimates = BaselineEstimates(sample, frontend);
        break;
      case Method::kOracleIbm:
        estimates = IdealBinaryMaskEstimates(sample, frontend, options.mask_threshold_ratio);
        break;
      case Method::kModel: {
        model::SeparationOptions so;
        so.binarize = options.binarize;
        if (options.classes == ClassSource::kGroundTruth) {
          estimates = model::Separate(*model, frontend, sample.mixture, sample.class_ids, so).estimates;
        } else {
          const auto presence = model::PredictPresence(*model, frontend, sample.mixture);
          const auto sel = model::InferClassIds(
              presence,
              options.classes == ClassSource::kTopK ? model::SelectionMode::kTopK : model::SelectionMode::kThreshold,
              options.topk, options.threshold);
          const auto sep = model::Separate(*model, frontend, sample.mixture, sel.class_ids, so);
          estimates = MatchEstimates(sample.class_ids, sel.class_ids, sep.estimates, length);
        }
        break;
      }
    }
    const auto rows = ScoreSources(sample, estimates, i, length);
    result.rows.insert(result.rows.end(), rows.begin(), rows.end());
    ++result.samples;
  }
  if (!result.rows.empty()) {
    for (const auto &r : result.rows) {
      result.mean_si_sdr += r.si_sdr;
      result.mean_sdr += r.sdr;
      result.mean_sir += r.sir;
      result.mean_sar += r.sar;
    }
    const double n = static_cast<double>(result.rows.size());
    result.mean_si_sdr /= n;
    result.mean_sdr /= n;
    result.mean_sir /= n;
    result.mean_sar /= n;
  }
  return result;
}

void WriteEvalCsv(const EvalResult &result, const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << kEvalHeader << "\n";
  char buf[256];
  for (const auto &r : result.rows) {
    std::snprintf(buf, sizeof buf, "%zu,%zu,%zu,%.6f,%.6f,%.6f,%.6f\n", r.sample_id, r.source_index, r.class_id,
                  r.si_sdr, r.sdr, r.sir, r.sar);
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "#MEAN,,,%.6f,%.6f,%.6f,%.6f\n", result.mean_si_sdr, result.mean_sdr,
                result.mean_sir, result.mean_sar);
  out << buf;
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

}  // namespace sgn::metrics
