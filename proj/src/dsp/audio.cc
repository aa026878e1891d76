// Copyright 2026 The SGN Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sgn/dsp/audio.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "sgn/common/error.h"

namespace sgn::dsp {

namespace {

std::uint32_t ReadU32(const std::vector<std::uint8_t> &b, std::size_t at) {
  return std::uint32_t(b[at]) | std::uint32_t(b[at + 1]) << 8 |
         std::uint32_t(b[at + 2]) << 16 | std::uint32_t(b[at + 3]) << 24;
}

std::uint16_t ReadU16(const std::vector<std::uint8_t> &b, std::size_t at) {
  return std::uint16_t(b[at] | b[at + 1] << 8);
}

void PutU32(std::vector<std::uint8_t> &b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(std::uint8_t(v >> (8 * i)));
}

void PutU16(std::vector<std::uint8_t> &b, std::uint16_t v) {
  b.push_back(std::uint8_t(v));
  b.push_back(std::uint8_t(v >> 8));
}

bool TagIs(const std::vector<std::uint8_t> &b, std::size_t at, const char *tag) {
  return std::memcmp(b.data() + at, tag, 4) == 0;
}

}  // namespace

void Validate(const Waveform &w) {
  if (w.samples.empty()) throw DomainError("waveform is empty");
  if (w.sample_rate_hz <= 0) {
    throw DomainError("sample rate must be positive, got " + std::to_string(w.sample_rate_hz));
  }
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    if (!std::isfinite(w.samples[i])) {
      throw DomainError("waveform sample " + std::to_string(i) + " is not finite");
    }
  }
}

Waveform PeakNormalize(const Waveform &w, double peak) {
  double mx = 0.0;
  for (double s : w.samples) mx = std::max(mx, std::abs(s));
  Waveform out = w;
  if (mx == 0.0) return out;
  for (double &s : out.samples) s *= peak / mx;
  return out;
}

Waveform LoadWav(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  const std::vector<std::uint8_t> b((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
  const std::string where = path.string() + ": ";
  if (b.size() < 12) throw FormatError(where + "file too short for a RIFF header", b.size());
  if (!TagIs(b, 0, "RIFF")) throw FormatError(where + "missing RIFF tag", 0);
  if (!TagIs(b, 8, "WAVE")) throw FormatError(where + "missing WAVE tag", 8);

  int channels = 0;
  int rate = 0;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (true) {
    if (pos + 8 > b.size()) {
      throw FormatError(where + "no data chunk before end of file", pos);
    }
    const std::uint32_t size = ReadU32(b, pos + 4);
    const std::size_t body = pos + 8;
    if (TagIs(b, pos, "fmt ")) {
      if (size < 16 || body + size > b.size()) {
        throw FormatError(where + "truncated fmt chunk", body);
      }
      std::uint16_t format = ReadU16(b, body);
      channels = ReadU16(b, body + 2);
      rate = static_cast<int>(ReadU32(b, body + 4));
      const std::uint16_t bits = ReadU16(b, body + 14);
      // WAVE_FORMAT_EXTENSIBLE carries the real format in its sub-format GUID.
      if (format == 0xFFFE && size >= 26) format = ReadU16(b, body + 24);
      if (format != 1) {
        throw FormatError(where + "unsupported codec " + std::to_string(format) +
                              " (only PCM is supported)", body);
      }
      if (bits != 16) {
        throw FormatError(where + "unsupported bit depth " + std::to_string(bits) +
                              " (only 16-bit PCM is supported)", body + 14);
      }
      if (channels != 1 && channels != 2) {
        throw FormatError(where + "unsupported channel count " + std::to_string(channels),
                          body + 2);
      }
      if (rate <= 0) throw FormatError(where + "sample rate is zero", body + 4);
      have_fmt = true;
    } else if (TagIs(b, pos, "data")) {
      if (!have_fmt) throw FormatError(where + "data chunk precedes fmt chunk", pos);
      if (body + size > b.size()) {
        throw FormatError(where + "truncated data chunk: " + std::to_string(size) +
                              " bytes declared, " + std::to_string(b.size() - body) +
                              " present", b.size());
      }
      const std::size_t frame_bytes = 2 * std::size_t(channels);
      if (size % frame_bytes != 0) {
        throw FormatError(where + "data size is not a whole number of frames", body);
      }
      const std::size_t n = size / frame_bytes;
      if (n == 0) throw FormatError(where + "data chunk is empty", body);
      Waveform w;
      w.sample_rate_hz = rate;
      w.samples.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int c = 0; c < channels; ++c) {
          acc += static_cast<std::int16_t>(ReadU16(b, body + i * frame_bytes + 2 * c)) / 32768.0;
        }
        w.samples[i] = acc / channels;
      }
      return w;
    }
    pos = body + size + (size & 1);
  }
}

void SaveWav(const Waveform &w, const std::filesystem::path &path) {
  Validate(w);
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(2 * w.samples.size());
  std::vector<std::uint8_t> b;
  b.reserve(44 + data_bytes);
  b.insert(b.end(), {'R', 'I', 'F', 'F'});
  PutU32(b, 36 + data_bytes);
  b.insert(b.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  PutU32(b, 16);
  PutU16(b, 1);
  PutU16(b, 1);
  PutU32(b, static_cast<std::uint32_t>(w.sample_rate_hz));
  PutU32(b, static_cast<std::uint32_t>(w.sample_rate_hz) * 2);
  PutU16(b, 2);
  PutU16(b, 16);
  b.insert(b.end(), {'d', 'a', 't', 'a'});
  PutU32(b, data_bytes);
  for (double s : w.samples) {
    const long q = std::lround(std::clamp(s, -1.0, 1.0) * 32768.0);
    PutU16(b, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::clamp(q, -32768L, 32767L))));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char *>(b.data()), static_cast<std::streamsize>(b.size()));
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

Waveform ResampleLinear(const Waveform &w, int target_hz) {
  Validate(w);
  if (target_hz <= 0) throw DomainError("target rate must be positive");
  if (target_hz == w.sample_rate_hz) return w;
  const std::size_t n = w.samples.size();
  const std::size_t m = static_cast<std::size_t>(
      static_cast<unsigned long long>(n) * static_cast<unsigned>(target_hz) /
      static_cast<unsigned>(w.sample_rate_hz));
  if (m == 0) throw DomainError("resampled waveform would be empty");
  Waveform out;
  out.sample_rate_hz = target_hz;
  out.samples.resize(m);
  const double step = static_cast<double>(w.sample_rate_hz) / target_hz;
  for (std::size_t i = 0; i < m; ++i) {
    const double t = i * step;
    const std::size_t lo = std::min(static_cast<std::size_t>(t), n - 1);
    const double a = t - lo;
    const double next = lo + 1 < n ? w.samples[lo + 1] : w.samples[lo];
    out.samples[i] = (1.0 - a) * w.samples[lo] + a * next;
  }
  return out;
}

void SavePgm(const Grid &magnitude, const std::filesystem::path &path) {
  if (magnitude.size() == 0) throw DimensionError("cannot export an empty grid");
  const Grid logmag = magnitude.array().abs().log1p().matrix();
  const double lo = logmag.minCoeff(), hi = logmag.maxCoeff();
  const double scale = hi > lo ? 255.0 / (hi - lo) : 0.0;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << "P5\n" << logmag.cols() << ' ' << logmag.rows() << "\n255\n";
  std::vector<char> row(static_cast<std::size_t>(logmag.cols()));
  for (Eigen::Index r = logmag.rows() - 1; r >= 0; --r) {
    for (Eigen::Index c = 0; c < logmag.cols(); ++c) {
      row[c] = static_cast<char>(static_cast<unsigned char>(std::lround((logmag(r, c) - lo) * scale)));
    }
    out.write(row.data(), static_cast<std::streamsize>(row.size()));
  }
}

}  // namespace sgn::dsp
