// Copyright 2026 The SGN Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <vector>

#include "doctest.h"
#include "sgn/common/error.h"
#include "sgn/dsp/audio.h"
#include "sgn/dsp/stft.h"
#include "sgn/dsp/warp.h"

using namespace sgn::dsp;
namespace fs = std::filesystem;

namespace {

Waveform Noise(std::size_t n, std::uint64_t seed, double scale = 0.3) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, scale);
  Waveform w;
  w.samples.resize(n);
  for (auto &s : w.samples) s = std::clamp(dist(rng), -1.0, 1.0);
  return w;
}

Waveform Sine(double hz, std::size_t n, int rate = kSampleRate, double amp = 1.0) {
  Waveform w;
  w.sample_rate_hz = rate;
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) w.samples[i] = amp * std::sin(2 * std::numbers::pi * hz * i / rate);
  return w;
}

double SnrDb(const std::vector<double> &ref, const std::vector<double> &est) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    num += ref[i] * ref[i];
    den += (ref[i] - est[i]) * (ref[i] - est[i]);
  }
  return 10 * std::log10(num / den);
}

fs::path TempPath(const std::string &name) {
  return fs::temp_directory_path() / ("sgn_test_dsp_" + name);
}

// Two-tap interpolation matrix built straight from the sample-point formula.
Eigen::MatrixXd OracleWarp(std::size_t lin, std::size_t log) {
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(log, lin);
  for (std::size_t j = 0; j < log; ++j) {
    const double f = 2.0 * std::pow((lin - 1) / 2.0, double(j) / (log - 1));
    for (std::size_t k = 0; k < lin; ++k) r(j, k) = std::max(0.0, 1.0 - std::abs(f - double(k)));
    r.row(j) /= r.row(j).sum();
  }
  return r;
}

Eigen::MatrixXd OracleUnwarp(std::size_t lin, std::size_t log) {
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(lin, log);
  for (std::size_t k = 0; k < lin; ++k) {
    const double pos = k <= 2 ? 0.0 : (log - 1) * std::log(k / 2.0) / std::log((lin - 1) / 2.0);
    for (std::size_t j = 0; j < log; ++j) u(k, j) = std::max(0.0, 1.0 - std::abs(pos - double(j)));
    u.row(k) /= u.row(k).sum();
  }
  return u;
}

}  // namespace

TEST_CASE("stft geometry") {
  Stft stft(256);
  CHECK(stft.bins() == 512);
  CHECK(stft.clip_length() == 65536);
  auto s = stft.Forward(Noise(65536, 1));
  CHECK(s.real.rows() == 512);
  CHECK(s.real.cols() == 256);
  CHECK((s.magnitude.array() >= 0).all());
}

TEST_CASE("stft of a bin-centred sine peaks at that bin") {
  Stft stft(64);
  for (std::size_t k : {5u, 40u, 200u, 470u}) {
    const double hz = double(k) * kSampleRate / 1022.0;
    auto s = stft.Forward(Sine(hz, stft.clip_length()));
    const std::size_t t = 32;
    std::vector<double> col(512);
    for (std::size_t b = 0; b < 512; ++b) col[b] = s.magnitude(b, t);
    const auto peak = std::max_element(col.begin(), col.end()) - col.begin();
    CHECK(peak == static_cast<std::ptrdiff_t>(k));
    std::vector<double> others;
    for (std::size_t b = 0; b < 512; ++b)
      if (b != k) others.push_back(col[b]);
    std::nth_element(others.begin(), others.begin() + others.size() / 2, others.end());
    CHECK(col[k] >= 100 * others[others.size() / 2]);
  }
}

TEST_CASE("stft matches a direct complex DFT") {
  Stft stft(8);
  auto w = Noise(stft.clip_length(), 2);
  auto s = stft.Forward(w);
  const std::size_t n = 1022, pad = 383;
  for (std::size_t t : {0u, 3u, 7u}) {
    for (std::size_t k : {0u, 1u, 100u, 511u}) {
      std::complex<double> acc = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const long src = long(t * 256 + i) - long(pad);
        const double x = (src >= 0 && src < long(w.size())) ? w.samples[src] : 0.0;
        const double h = 0.5 - 0.5 * std::cos(2 * std::numbers::pi * i / n);
        acc += h * x * std::polar(1.0, -2 * std::numbers::pi * double(k) * i / n);
      }
      CHECK(s.real(k, t) == doctest::Approx(acc.real()).epsilon(1e-9));
      CHECK(s.imag(k, t) == doctest::Approx(acc.imag()).epsilon(1e-9));
    }
  }
}

TEST_CASE("stft parseval on white noise") {
  Stft stft(32);
  auto w = Noise(stft.clip_length(), 3);
  auto s = stft.Forward(w);
  const std::size_t n = 1022;
  for (std::size_t t = 0; t < 32; ++t) {
    double time_energy = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const long src = long(t * 256 + i) - 383;
      const double x = (src >= 0 && src < long(w.size())) ? w.samples[src] : 0.0;
      const double h = stft.window()[i];
      time_energy += h * h * x * x;
    }
    double freq_energy = 0;
    for (std::size_t k = 0; k < 512; ++k) {
      const double p = s.magnitude(k, t) * s.magnitude(k, t);
      freq_energy += (k == 0 || k == 511) ? p : 2 * p;
    }
    freq_energy /= n;
    CHECK(std::abs(freq_energy - time_energy) <= 1e-6 * time_energy);
  }
}

TEST_CASE("stft round trip exceeds 50 dB at reference size") {
  Stft stft(256);
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    auto w = Noise(stft.clip_length(), 100 + seed);
    auto s = stft.Forward(w);
    auto back = stft.Inverse(s.real, s.imag, w.size());
    CHECK(SnrDb(w.samples, back.samples) > 50.0);
  }
}

TEST_CASE("zero and phase-only spectrograms") {
  Stft stft(16);
  auto zero = stft.Forward(Waveform{std::vector<double>(stft.clip_length(), 0.0)});
  CHECK(zero.magnitude.isZero(0));
  auto back = stft.Inverse(zero.real, zero.imag, stft.clip_length());
  CHECK(std::all_of(back.samples.begin(), back.samples.end(), [](double v) { return v == 0.0; }));

  auto w = Noise(stft.clip_length(), 4);
  auto s = stft.Forward(w);
  // Zero magnitude with the original phase.
  Grid re = s.real.array() * 0.0, im = s.imag.array() * 0.0;
  auto silent = stft.Inverse(re, im, w.size());
  double e0 = 0, e1 = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    e0 += w.samples[i] * w.samples[i];
    e1 += silent.samples[i] * silent.samples[i];
  }
  CHECK(e1 < 1e-10 * e0);
}

TEST_CASE("stft input validation and clip fitting") {
  Stft stft(16);
  Waveform wrong = Noise(stft.clip_length(), 5);
  wrong.sample_rate_hz = 44100;
  try {
    stft.Forward(wrong);
    FAIL("expected DomainError");
  } catch (const sgn::DomainError &e) {
    CHECK(std::string(e.what()).find("resample") != std::string::npos);
  }
  CHECK_THROWS_AS(stft.Forward(Noise(1000, 5)), sgn::DomainError);
  CHECK_THROWS_AS(stft.Inverse(Grid::Zero(511, 16), Grid::Zero(511, 16), 10), sgn::DimensionError);

  Waveform longer;
  longer.samples.resize(stft.clip_length() + 10);
  for (std::size_t i = 0; i < longer.size(); ++i) longer.samples[i] = double(i) / longer.size();
  auto clip = stft.FitClip(longer);
  CHECK(clip.size() == stft.clip_length());
  CHECK(clip[0] == longer.samples[5]);

  auto shorter = stft.FitClip(Noise(2000, 6));
  CHECK(shorter.size() == stft.clip_length());
  CHECK(shorter[2500] == 0.0);
}

TEST_CASE("warp matrix is row-stochastic and matches the oracle") {
  for (auto [lin, log] : {std::pair<std::size_t, std::size_t>{512, 256}, {512, 64}, {64, 16}}) {
    LogFrequencyWarp warp(lin, log);
    const Eigen::MatrixXd r = warp.WarpMatrix();
    CHECK((r.rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-12);
    CHECK((r - OracleWarp(lin, log)).cwiseAbs().maxCoeff() <= 1e-12);
    const Eigen::MatrixXd u = warp.UnwarpMatrix();
    CHECK((u.rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-12);
    CHECK((u - OracleUnwarp(lin, log)).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("warp applies the dense operator") {
  LogFrequencyWarp warp(512, 256);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> dist(0.0, 3.0);
  Grid x(512, 9), y(512, 9);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    x.data()[i] = dist(rng);
    y.data()[i] = dist(rng);
  }
  const Eigen::MatrixXd dense = OracleWarp(512, 256);
  CHECK((warp.Warp(x) - dense * x).cwiseAbs().maxCoeff() <= 1e-12);
  Grid w(256, 9);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
  CHECK((warp.Unwarp(w) - OracleUnwarp(512, 256) * w).cwiseAbs().maxCoeff() <= 1e-10);

  // Linearity.
  const Grid lhs = warp.Warp(2.5 * x - 0.75 * y);
  const Grid rhs = 2.5 * warp.Warp(x) - 0.75 * warp.Warp(y);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12);

  CHECK_THROWS_AS(warp.Warp(Grid::Zero(511, 3)), sgn::DimensionError);
}

TEST_CASE("warp special inputs") {
  LogFrequencyWarp warp(512, 256);
  Grid flat = Grid::Constant(512, 1, 0.7);
  CHECK((warp.Warp(flat).array() - 0.7).abs().maxCoeff() <= 1e-12);

  // Bin 2 and the Nyquist bin are both exact sample points.
  Grid top = Grid::Zero(512, 1);
  top(511, 0) = 1.0;
  Grid out = warp.Warp(top);
  CHECK(out(255, 0) == 1.0);
  CHECK(out.sum() == doctest::Approx(1.0));
  Grid low = Grid::Zero(512, 1);
  low(2, 0) = 1.0;
  out = warp.Warp(low);
  CHECK(out(0, 0) == 1.0);
  CHECK((out.array() == 1.0).count() == 1);

  CHECK(warp.Unwarp(Grid::Zero(256, 4)).isZero(0));
}

TEST_CASE("unwarp of warped smooth spectra stays within 5 percent") {
  for (std::size_t log : {256u, 64u}) {
    LogFrequencyWarp warp(512, log);
    Grid ramp(512, 3);
    for (int k = 0; k < 512; ++k) {
      ramp(k, 0) = 1.0 + k / 511.0;                        // rising ramp
      ramp(k, 1) = 2.0 - k / 511.0;                        // falling ramp
      ramp(k, 2) = 1.0 + 0.5 * std::cos(k / 511.0 * 3.0);  // slow ripple
    }
    const Grid back = warp.Unwarp(warp.Warp(ramp));
    for (int c = 0; c < 3; ++c) {
      const double err = (back.col(c) - ramp.col(c)).norm() / ramp.col(c).norm();
      CHECK(err < 0.05);
    }
  }
}

TEST_CASE("analyze fills the warped magnitude") {
  Stft stft(16);
  LogFrequencyWarp warp(512, 16);
  auto s = Analyze(stft, warp, Noise(stft.clip_length(), 8));
  CHECK(s.warped.rows() == 16);
  CHECK(s.warped.cols() == 16);
  CHECK((s.warped.array() >= 0).all());
}

TEST_CASE("wav round trip stays within one quantization step") {
  auto w = Noise(5000, 9, 0.5);
  w.samples[0] = 1.0;
  w.samples[1] = -1.0;
  const auto path = TempPath("rt.wav");
  SaveWav(w, path);
  auto back = LoadWav(path);
  REQUIRE(back.size() == w.size());
  CHECK(back.sample_rate_hz == w.sample_rate_hz);
  double worst = 0;
  for (std::size_t i = 0; i < w.size(); ++i) worst = std::max(worst, std::abs(back.samples[i] - w.samples[i]));
  CHECK(worst <= 1.0 / 32768.0);
  fs::remove(path);
}

namespace {

std::vector<std::uint8_t> StereoWav(const std::vector<std::int16_t> &left, const std::vector<std::int16_t> &right,
                                    std::uint16_t bits = 16) {
  std::vector<std::uint8_t> b;
  auto u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back(std::uint8_t(v >> (8 * i)));
  };
  auto u16 = [&](std::uint16_t v) {
    b.push_back(std::uint8_t(v));
    b.push_back(std::uint8_t(v >> 8));
  };
  const std::uint32_t data = std::uint32_t(left.size() * 4);
  b.insert(b.end(), {'R', 'I', 'F', 'F'});
  u32(36 + data);
  b.insert(b.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  u32(16);
  u16(1);
  u16(2);
  u32(11025);
  u32(11025 * 4);
  u16(4);
  u16(bits);
  b.insert(b.end(), {'d', 'a', 't', 'a'});
  u32(data);
  for (std::size_t i = 0; i < left.size(); ++i) {
    u16(std::uint16_t(left[i]));
    u16(std::uint16_t(right[i]));
  }
  return b;
}

void WriteBytes(const fs::path &p, const std::vector<std::uint8_t> &b) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char *>(b.data()), std::streamsize(b.size()));
}

}  // namespace

TEST_CASE("stereo wav is averaged to mono") {
  std::vector<std::int16_t> l{100, -2000, 32767, 7}, r{-100, 2000, -32767, -7};
  const auto path = TempPath("stereo.wav");
  WriteBytes(path, StereoWav(l, r));
  auto w = LoadWav(path);
  REQUIRE(w.size() == 4);
  for (double s : w.samples) CHECK(s == 0.0);
  fs::remove(path);
}

TEST_CASE("malformed wav files") {
  const auto path = TempPath("bad.wav");
  auto good = StereoWav({1, 2, 3}, {1, 2, 3});

  auto bad_tag = good;
  bad_tag[0] = 'X';
  WriteBytes(path, bad_tag);
  CHECK_THROWS_AS(LoadWav(path), sgn::FormatError);

  WriteBytes(path, StereoWav({1}, {1}, 24));
  try {
    LoadWav(path);
    FAIL("expected FormatError");
  } catch (const sgn::FormatError &e) {
    CHECK(std::string(e.what()).find("bit depth") != std::string::npos);
  }

  auto truncated = good;
  truncated.resize(truncated.size() - 3);
  WriteBytes(path, truncated);
  try {
    LoadWav(path);
    FAIL("expected FormatError");
  } catch (const sgn::FormatError &e) {
    CHECK(e.offset() == truncated.size());
    CHECK(std::string(e.what()).find("byte offset") != std::string::npos);
  }

  WriteBytes(path, {'R', 'I', 'F'});
  CHECK_THROWS_AS(LoadWav(path), sgn::FormatError);
  fs::remove(path);
}

TEST_CASE("linear resampling") {
  auto w = Noise(1000, 10);
  auto same = ResampleLinear(w, kSampleRate);
  CHECK(same.samples == w.samples);

  Waveform flat{std::vector<double>(4410, 0.25), 44100};
  for (int rate : {11025, 8000, 22050, 48000}) {
    auto r = ResampleLinear(flat, rate);
    CHECK(r.size() == std::size_t(4410ull * rate / 44100));
    for (double s : r.samples) CHECK(s == doctest::Approx(0.25).epsilon(1e-15));
  }
  CHECK_THROWS_AS(ResampleLinear(w, 0), sgn::DomainError);
}

TEST_CASE("resampled sine keeps its spectral peak") {
  Stft stft(32);
  const std::size_t n = stft.clip_length();
  auto peak_bin = [&](const Waveform &x) {
    auto s = stft.Forward(x);
    Eigen::Index best;
    s.magnitude.col(16).maxCoeff(&best);
    return best;
  };
  const auto reference = peak_bin(Sine(200.0, n));
  auto down = ResampleLinear(Sine(200.0, n * 4, 44100), kSampleRate);
  CHECK(down.size() == n);
  CHECK(peak_bin(down) == reference);
}

TEST_CASE("pgm export") {
  Grid g(3, 2);
  g << 0, 0, 1, 1, 9, 9;
  const auto path = TempPath("spec.pgm");
  SavePgm(g, path);
  std::ifstream in(path, std::ios::binary);
  std::string magic;
  int w, h, maxv;
  in >> magic >> w >> h >> maxv;
  in.get();
  CHECK(magic == "P5");
  CHECK(w == 2);
  CHECK(h == 3);
  CHECK(maxv == 255);
  std::vector<unsigned char> px(6);
  in.read(reinterpret_cast<char *>(px.data()), 6);
  // Highest-frequency row comes first.
  CHECK(px[0] == 255);
  CHECK(px[5] == 0);
  fs::remove(path);
}

TEST_CASE("waveform validation and normalization") {
  CHECK_THROWS_AS(Validate(Waveform{}), sgn::DomainError);
  CHECK_THROWS_AS(Validate(Waveform{{0.1, std::nan("")}, kSampleRate}), sgn::DomainError);
  auto w = PeakNormalize(Waveform{{0.1, -0.4, 0.2}, kSampleRate}, 0.5);
  CHECK(w.samples[1] == doctest::Approx(-0.5));
  CHECK(std::all_of(w.samples.begin(), w.samples.end(), [](double s) { return std::abs(s) <= 1.0; }));
}
