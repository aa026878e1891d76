// Copyright 2026 The SGN Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sgn/metrics/metrics.h"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "sgn/common/error.h"

namespace sgn::metrics {

namespace {

using ConstVec = Eigen::Map<const Eigen::VectorXd>;

ConstVec View(std::span<const double> s) { return ConstVec(s.data(), static_cast<Eigen::Index>(s.size())); }

}  // namespace

double RatioDb(double num, double den) {
  if (den <= 0) return num > 0 ? kDbCap : -kDbCap;
  if (num <= 0) return -kDbCap;
  return std::clamp(10 * std::log10(num / den), -kDbCap, kDbCap);
}

double SiSdr(std::span<const double> estimate, std::span<const double> reference) {
  if (estimate.size() != reference.size()) {
    throw DimensionError("si_sdr: estimate has " + std::to_string(estimate.size()) + " samples, reference " +
                         std::to_string(reference.size()));
  }
  const auto s = View(reference), e = View(estimate);
  const double energy = s.squaredNorm();
  if (energy == 0) throw DomainError("si_sdr: reference is all zeros");
  const double alpha = e.dot(s) / energy;
  const Eigen::VectorXd target = alpha * s;
  return RatioDb(target.squaredNorm(), (target - e).squaredNorm());
}

double SiSdr(const dsp::Waveform &estimate, const dsp::Waveform &reference) {
  return SiSdr(std::span<const double>(estimate.samples), std::span<const double>(reference.samples));
}

BssDecomposition Decompose(std::span<const double> estimate,
                           const std::vector<std::span<const double>> &references, std::size_t target) {
  if (references.empty() || target >= references.size()) {
    throw DomainError("bss_eval: target index " + std::to_string(target) + " out of range");
  }
  const auto n = static_cast<Eigen::Index>(estimate.size());
  Eigen::MatrixXd refs(n, static_cast<Eigen::Index>(references.size()));
  for (std::size_t j = 0; j < references.size(); ++j) {
    if (references[j].size() != estimate.size()) throw DimensionError("bss_eval: reference length mismatch");
    refs.col(static_cast<Eigen::Index>(j)) = View(references[j]);
  }
  const auto e = View(estimate);
  const auto s = refs.col(static_cast<Eigen::Index>(target));
  const double energy = s.squaredNorm();
  if (energy == 0) throw DomainError("bss_eval: target reference is all zeros");

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(refs);
  qr.setThreshold(1e-10);
  if (qr.rank() < refs.cols()) {
    throw DomainError("bss_eval: references are linearly dependent (rank " + std::to_string(qr.rank()) +
                      " of " + std::to_string(refs.cols()) + ")");
  }
  const Eigen::VectorXd all = refs * qr.solve(e.eval());
  const Eigen::VectorXd t = (e.dot(s) / energy) * s;

  BssDecomposition d;
  d.target.assign(t.data(), t.data() + n);
  d.interf.resize(estimate.size());
  d.artif.resize(estimate.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    d.interf[i] = all[i] - t[i];
    d.artif[i] = e[i] - all[i];
  }
  return d;
}

BssScores BssEval(std::span<const double> estimate, const std::vector<std::span<const double>> &references,
                  std::size_t target) {
  const BssDecomposition d = Decompose(estimate, references, target);
  const auto t = View(d.target), i = View(d.interf), a = View(d.artif);
  BssScores s;
  s.sdr = RatioDb(t.squaredNorm(), (i + a).squaredNorm());
  s.sir = RatioDb(t.squaredNorm(), i.squaredNorm());
  s.sar = RatioDb((t + i).squaredNorm(), a.squaredNorm());
  return s;
}

BssScores BssEval(const dsp::Waveform &estimate, const std::vector<dsp::Waveform> &references,
                  std::size_t target) {
  std::vector<std::span<const double>> refs;
  for (const auto &r : references) refs.emplace_back(r.samples);
  return BssEval(std::span<const double>(estimate.samples), refs, target);
}

}  // namespace sgn::metrics
