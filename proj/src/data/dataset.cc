// Copyright 2026 The SGN Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sgn/data/dataset.h"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "sgn/common/error.h"

namespace sgn::data {

namespace fs = std::filesystem;

namespace {

constexpr double kSourcePeak = 0.5;
constexpr int kNoiseComponents = 64;

std::vector<std::string> SplitOn(const std::string &s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

template <typename T>
bool ParseNumber(const std::string &s, T &out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && !s.empty();
}

std::string Join(const std::vector<std::string> &parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

bool IsWav(const fs::path &p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".wav";
}

}  // namespace

const char *FamilyKindName(FamilyKind kind) {
  switch (kind) {
    case FamilyKind::kHarmonicStack: return "harmonic_stack";
    case FamilyKind::kPureToneBand: return "pure_tone_band";
    case FamilyKind::kBandpassNoise: return "bandpass_noise";
    case FamilyKind::kLinearChirp: return "linear_chirp";
    case FamilyKind::kAmTone: return "am_tone";
  }
  return "unknown";
}

std::pair<double, double> SourceFamily::Band() const {
  switch (kind) {
    case FamilyKind::kHarmonicStack: return {lo_hz, 5 * hi_hz};
    case FamilyKind::kLinearChirp: return {std::min(lo_hz, aux_lo), std::max(hi_hz, aux_hi)};
    case FamilyKind::kAmTone: return {lo_hz - aux_hi, hi_hz + aux_hi};
    default: return {lo_hz, hi_hz};
  }
}

std::vector<SourceFamily> DefaultFamilies(std::size_t classes) {
  if (classes == 0) throw DomainError("at least one class is required");
  std::vector<SourceFamily> base{
      {0, FamilyKind::kHarmonicStack, 110, 220, 0, 0},
      {1, FamilyKind::kPureToneBand, 500, 900, 0, 0},
      {2, FamilyKind::kBandpassNoise, 1500, 3000, 0, 0},
      {3, FamilyKind::kLinearChirp, 300, 350, 2400, 2500},
      {4, FamilyKind::kAmTone, 3200, 3800, 4, 12},
  };
  std::vector<SourceFamily> out(base.begin(), base.begin() + std::min<std::size_t>(classes, 5));
  if (classes > 5) {
    const std::size_t extra = classes - 5;
    const double lo = 4000, hi = 5300;
    for (std::size_t j = 0; j < extra; ++j) {
      const double a = lo * std::pow(hi / lo, double(j) / extra);
      const double b = lo * std::pow(hi / lo, double(j + 1) / extra);
      // Keep a guard gap between neighbouring bands.
      const double gap = 0.15 * (b - a);
      SourceFamily f{5 + j, j % 2 ? FamilyKind::kAmTone : FamilyKind::kPureToneBand,
                     a + gap, b - gap, 0, 0};
      if (f.kind == FamilyKind::kAmTone) {
        f.aux_lo = 3;
        f.aux_hi = 8;
      }
      out.push_back(f);
    }
  }
  return out;
}

dsp::Waveform SynthSource(const SourceFamily &family, std::uint64_t seed, std::size_t length,
                          int sample_rate_hz) {
  if (length == 0) throw DomainError("source length must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double a, double b) { return a + (b - a) * unit(rng); };
  const double two_pi = 2 * std::numbers::pi;
  const double rate = sample_rate_hz;
  const double duration = length / rate;

  dsp::Waveform w;
  w.sample_rate_hz = sample_rate_hz;
  w.samples.assign(length, 0.0);
  auto &s = w.samples;
  switch (family.kind) {
    case FamilyKind::kHarmonicStack: {
      const double f0 = uniform(family.lo_hz, family.hi_hz);
      for (int k = 1; k <= 5; ++k) {
        const double phase = uniform(0, two_pi);
        for (std::size_t i = 0; i < length; ++i) s[i] += std::sin(two_pi * k * f0 * i / rate + phase) / k;
      }
      break;
    }
    case FamilyKind::kPureToneBand: {
      const double f = uniform(family.lo_hz, family.hi_hz), phase = uniform(0, two_pi);
      for (std::size_t i = 0; i < length; ++i) s[i] = std::sin(two_pi * f * i / rate + phase);
      break;
    }
    case FamilyKind::kBandpassNoise: {
      for (int c = 0; c < kNoiseComponents; ++c) {
        const double f = uniform(family.lo_hz, family.hi_hz), phase = uniform(0, two_pi);
        for (std::size_t i = 0; i < length; ++i) s[i] += std::sin(two_pi * f * i / rate + phase);
      }
      break;
    }
    case FamilyKind::kLinearChirp: {
      const double f0 = uniform(family.lo_hz, family.hi_hz);
      const double f1 = uniform(family.aux_lo, family.aux_hi);
      const double phase = uniform(0, two_pi);
      const double slope = (f1 - f0) / duration;
      for (std::size_t i = 0; i < length; ++i) {
        const double t = i / rate;
        s[i] = std::sin(two_pi * (f0 * t + 0.5 * slope * t * t) + phase);
      }
      break;
    }
    case FamilyKind::kAmTone: {
      const double f = uniform(family.lo_hz, family.hi_hz), phase = uniform(0, two_pi);
      const double am = uniform(family.aux_lo, family.aux_hi), am_phase = uniform(0, two_pi);
      for (std::size_t i = 0; i < length; ++i) {
        const double t = i / rate;
        s[i] = (1.0 + 0.8 * std::sin(two_pi * am * t + am_phase)) * std::sin(two_pi * f * t + phase);
      }
      break;
    }
  }
  return dsp::PeakNormalize(w, kSourcePeak);
}

MixtureSample MakeMixture(std::span<const dsp::Waveform> sources, std::span<const std::size_t> class_ids,
                          std::size_t classes) {
  if (sources.empty()) throw DomainError("a mixture needs at least one source");
  if (sources.size() != class_ids.size()) {
    throw DimensionError("got " + std::to_string(sources.size()) + " sources but " +
                         std::to_string(class_ids.size()) + " class ids");
  }
  MixtureSample m;
  m.presence.assign(classes, 0.0);
  const std::size_t n = sources[0].size();
  m.mixture.sample_rate_hz = sources[0].sample_rate_hz;
  m.mixture.samples.assign(n, 0.0);
  for (std::size_t k = 0; k < sources.size(); ++k) {
    const auto id = class_ids[k];
    if (id >= classes) throw DomainError("class id " + std::to_string(id) + " out of range");
    if (m.presence[id] != 0.0) {
      throw DomainError("duplicate class " + std::to_string(id) + " in one mixture");
    }
    if (sources[k].size() != n || sources[k].sample_rate_hz != m.mixture.sample_rate_hz) {
      throw DimensionError("mixture sources must share length and sample rate");
    }
    m.presence[id] = 1.0;
    dsp::Waveform scaled = sources[k];
    for (double &v : scaled.samples) v *= kMixGain;
    for (std::size_t i = 0; i < n; ++i) m.mixture.samples[i] += scaled.samples[i];
    m.sources.push_back(std::move(scaled));
    m.class_ids.push_back(id);
  }
  for (double &v : m.mixture.samples) v = std::clamp(v, -1.0, 1.0);
  return m;
}

std::vector<const ManifestEntry *> DatasetManifest::Split(const std::string &split) const {
  std::vector<const ManifestEntry *> out;
  for (const auto &e : entries)
    if (e.split == split) out.push_back(&e);
  return out;
}

DatasetManifest BuildDataset(std::size_t classes, const SplitSizes &sizes, std::size_t sources,
                             std::uint64_t seed, std::size_t frames) {
  if (classes == 0) throw DomainError("at least one class is required");
  if (sources == 0 || sources > classes) throw DomainError("N must not exceed C");
  DatasetManifest m;
  m.classes = classes;
  m.sources_per_mixture = sources;
  m.frames = frames;
  for (const auto &f : DefaultFamilies(classes)) m.class_names.push_back(FamilyKindName(f.kind));

  std::mt19937_64 rng(seed);
  const bool need_coverage = sizes.train >= 4 * classes;
  for (int attempt = 0;; ++attempt) {
    if (attempt == 1000) throw Error("could not cover every class in the training split");
    m.entries.clear();
    std::set<std::uint64_t> used;
    std::vector<std::size_t> seen(classes, 0);
    const std::pair<const char *, std::size_t> splits[] = {
        {"train", sizes.train}, {"val", sizes.val}, {"test", sizes.test}};
    for (auto [name, count] : splits) {
      for (std::size_t i = 0; i < count; ++i) {
        ManifestEntry e;
        e.split = name;
        std::vector<std::size_t> pool(classes);
        for (std::size_t c = 0; c < classes; ++c) pool[c] = c;
        for (std::size_t k = 0; k < sources; ++k) {
          const std::size_t j = k + rng() % (classes - k);
          std::swap(pool[k], pool[j]);
          e.class_ids.push_back(pool[k]);
        }
        std::sort(e.class_ids.begin(), e.class_ids.end());
        for (std::size_t k = 0; k < sources; ++k) {
          std::uint64_t s = rng();
          while (!used.insert(s).second) s = rng();
          e.seeds.push_back(s);
        }
        if (e.split == "train")
          for (auto id : e.class_ids) ++seen[id];
        m.entries.push_back(std::move(e));
      }
    }
    if (!need_coverage || std::all_of(seen.begin(), seen.end(), [](std::size_t n) { return n > 0; })) {
      return m;
    }
  }
}

void WriteManifest(const DatasetManifest &m, const fs::path &path) {
  std::ostringstream os;
  os << "# sgn-manifest version=" << m.version
     << " kind=" << (m.kind == DatasetManifest::Kind::kSynthetic ? "synthetic" : "wav")
     << " classes=" << m.classes << " sources=" << m.sources_per_mixture << " frames=" << m.frames
     << "\n";
  if (m.kind == DatasetManifest::Kind::kWavPool) os << "# root=" << m.root.string() << "\n";
  for (std::size_t c = 0; c < m.class_names.size(); ++c) os << "# class " << c << " " << m.class_names[c] << "\n";
  for (const auto &e : m.entries) {
    std::vector<std::string> ids, refs;
    for (auto id : e.class_ids) ids.push_back(std::to_string(id));
    for (auto s : e.seeds) refs.push_back(std::to_string(s));
    for (const auto &p : e.paths) {
      if (p.find_first_of(",\t\n") != std::string::npos) {
        throw DomainError("manifest paths must not contain commas, tabs or newlines: '" + p + "'");
      }
      refs.push_back(p);
    }
    os << e.split << '\t' << Join(ids, ',') << '\t' << Join(refs, ',') << '\n';
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write manifest '" + path.string() + "'");
  out << os.str();
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

DatasetManifest ReadManifest(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open manifest '" + path.string() + "'");
  DatasetManifest m;
  m.root = path.parent_path();
  bool have_header = false;
  std::string line;
  std::uint64_t offset = 0;
  const std::string where = path.string() + ": ";
  while (std::getline(in, line)) {
    const std::uint64_t line_start = offset;
    offset += line.size() + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.rfind("# sgn-manifest", 0) == 0) {
      std::istringstream hs(line.substr(14));
      std::string kv;
      while (hs >> kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw FormatError(where + "bad header field '" + kv + "'", line_start);
        const std::string k = kv.substr(0, eq), v = kv.substr(eq + 1);
        if (k == "version") {
          if (!ParseNumber(v, m.version)) throw FormatError(where + "bad version", line_start);
          if (m.version != 1) {
            throw IncompatibleError(where + "unsupported manifest version " + v);
          }
        } else if (k == "kind") {
          if (v == "synthetic") m.kind = DatasetManifest::Kind::kSynthetic;
          else if (v == "wav") m.kind = DatasetManifest::Kind::kWavPool;
          else throw FormatError(where + "unknown manifest kind '" + v + "'", line_start);
        } else if (k == "classes") {
          if (!ParseNumber(v, m.classes)) throw FormatError(where + "bad class count", line_start);
        } else if (k == "sources") {
          if (!ParseNumber(v, m.sources_per_mixture)) throw FormatError(where + "bad source count", line_start);
        } else if (k == "frames") {
          if (!ParseNumber(v, m.frames)) throw FormatError(where + "bad frame count", line_start);
        }
      }
      have_header = true;
      continue;
    }
    if (line.rfind("# root=", 0) == 0) {
      const fs::path root = line.substr(7);
      m.root = root.is_absolute() ? root : path.parent_path() / root;
      continue;
    }
    if (line.rfind("# class ", 0) == 0) {
      std::istringstream cs(line.substr(8));
      std::size_t id;
      std::string name;
      cs >> id >> name;
      if (id != m.class_names.size()) throw FormatError(where + "class names out of order", line_start);
      m.class_names.push_back(name);
      continue;
    }
    if (line[0] == '#') continue;
    if (!have_header) throw FormatError(where + "missing '# sgn-manifest' header", line_start);
    const auto fields = SplitOn(line, '\t');
    if (fields.size() != 3) throw FormatError(where + "expected 3 tab-separated fields", line_start);
    ManifestEntry e;
    e.split = fields[0];
    for (const auto &id : SplitOn(fields[1], ',')) {
      std::size_t v;
      if (!ParseNumber(id, v) || v >= m.classes) {
        throw FormatError(where + "invalid class id '" + id + "'", line_start);
      }
      e.class_ids.push_back(v);
    }
    for (const auto &ref : SplitOn(fields[2], ',')) {
      if (m.kind == DatasetManifest::Kind::kSynthetic) {
        std::uint64_t s;
        if (!ParseNumber(ref, s)) throw FormatError(where + "invalid seed '" + ref + "'", line_start);
        e.seeds.push_back(s);
      } else {
        e.paths.push_back(ref);
      }
    }
    if (e.seeds.size() + e.paths.size() != e.class_ids.size() || e.class_ids.empty()) {
      throw FormatError(where + "class ids and sources do not pair up", line_start);
    }
    m.entries.push_back(std::move(e));
  }
  if (!have_header) throw FormatError(where + "missing '# sgn-manifest' header", 0);
  return m;
}

WavScan LoadWavDataset(const fs::path &root, std::size_t frames) {
  if (!fs::is_directory(root)) throw Error("'" + root.string() + "' is not a directory");
  std::vector<fs::path> dirs;
  for (const auto &d : fs::directory_iterator(root))
    if (d.is_directory()) dirs.push_back(d.path());
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) throw Error("'" + root.string() + "' has no class directories");

  WavScan scan;
  auto &m = scan.manifest;
  m.kind = DatasetManifest::Kind::kWavPool;
  m.classes = dirs.size();
  m.sources_per_mixture = 1;
  m.frames = frames;
  m.root = fs::absolute(root);
  for (std::size_t c = 0; c < dirs.size(); ++c) {
    m.class_names.push_back(dirs[c].filename().string());
    std::vector<fs::path> files;
    for (const auto &f : fs::directory_iterator(dirs[c]))
      if (f.is_regular_file()) files.push_back(f.path());
    std::sort(files.begin(), files.end());
    std::size_t kept = 0;
    for (const auto &f : files) {
      if (!IsWav(f)) {
        ++scan.warnings;
        continue;
      }
      try {
        dsp::LoadWav(f);
      } catch (const Error &) {
        ++scan.warnings;
        continue;
      }
      // Every tenth file of a class goes to test, the one before it to val.
      const char *split = kept % 10 == 9 ? "test" : kept % 10 == 8 ? "val" : "train";
      m.entries.push_back({split, {c}, {}, {fs::relative(f, root).generic_string()}});
      ++kept;
    }
    if (kept == 0) throw Error("class directory '" + dirs[c].string() + "' has no readable WAV files");
  }
  return scan;
}

std::vector<ManifestEntry> PairWavEntries(const DatasetManifest &pool, const std::string &split,
                                          std::size_t count, std::size_t sources, std::uint64_t seed) {
  std::map<std::size_t, std::vector<const ManifestEntry *>> by_class;
  for (const auto *e : pool.Split(split)) by_class[e->class_ids.at(0)].push_back(e);
  std::vector<std::size_t> classes;
  for (const auto &[c, files] : by_class) classes.push_back(c);
  if (sources == 0 || classes.size() < sources) {
    throw DomainError("split '" + split + "' has " + std::to_string(classes.size()) +
                      " classes, fewer than the " + std::to_string(sources) + " sources requested");
  }
  std::mt19937_64 rng(seed);
  std::vector<ManifestEntry> out;
  for (std::size_t i = 0; i < count; ++i) {
    ManifestEntry e;
    e.split = split;
    std::vector<std::size_t> order = classes;
    for (std::size_t k = 0; k < sources; ++k) {
      std::swap(order[k], order[k + rng() % (order.size() - k)]);
      const auto &files = by_class[order[k]];
      e.class_ids.push_back(order[k]);
      e.paths.push_back(files[rng() % files.size()]->paths.at(0));
    }
    out.push_back(std::move(e));
  }
  return out;
}

MixtureSample Realize(const DatasetManifest &m, const ManifestEntry &entry, std::size_t length) {
  std::vector<dsp::Waveform> sources;
  if (!entry.seeds.empty()) {
    const auto families = DefaultFamilies(m.classes);
    for (std::size_t k = 0; k < entry.seeds.size(); ++k) {
      sources.push_back(SynthSource(families.at(entry.class_ids[k]), entry.seeds[k], length));
    }
  } else {
    for (const auto &p : entry.paths) {
      dsp::Waveform w = dsp::LoadWav(m.root / p);
      if (w.sample_rate_hz != dsp::kSampleRate) w = dsp::ResampleLinear(w, dsp::kSampleRate);
      dsp::Waveform fitted;
      fitted.samples.assign(length, 0.0);
      if (w.size() <= length) {
        std::copy(w.samples.begin(), w.samples.end(), fitted.samples.begin());
      } else {
        const std::size_t start = (w.size() - length) / 2;
        std::copy_n(w.samples.begin() + static_cast<std::ptrdiff_t>(start), length, fitted.samples.begin());
      }
      sources.push_back(dsp::PeakNormalize(fitted, kSourcePeak));
    }
  }
  return MakeMixture(sources, entry.class_ids, m.classes);
}

}  // namespace sgn::data
