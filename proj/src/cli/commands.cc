// Copyright 2026 The SGN Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sgn/cli/commands.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <optional>
#include <ostream>
#include <sstream>

#include <Eigen/Core>

#include "CLI11.hpp"
#include "sgn/autodiff/tensor.h"
#include "sgn/common/key_value.h"
#include "sgn/data/dataset.h"
#include "sgn/metrics/evaluation.h"
#include "sgn/model/pipeline.h"
#include "sgn/training/checkpoint.h"

namespace sgn::cli {

namespace fs = std::filesystem;

namespace {

std::string ReadText(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string Prefixed(const std::string &prefix, const std::string &text) {
  std::istringstream in(text);
  std::string line, out;
  while (std::getline(in, line)) {
    if (!line.empty()) out += prefix + line + "\n";
  }
  return out;
}

fs::path ResolveOut(const std::string &flag, const char *command) {
  const fs::path dir = flag.empty() ? DefaultRunRoot() / command : fs::path(flag);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory '" + dir.string() + "': " + ec.message());
  return dir;
}

void WriteRunConfig(const RunConfig &rc, const fs::path &dir, std::ostream &out) {
  const fs::path path = dir / "run_config.txt";
  std::ofstream f(path, std::ios::binary);
  f << rc.ToText();
  if (!f) throw Error("cannot write '" + path.string() + "'");
  out << "config: " << path.string() << "\n";
}

// Usage errors raised by library validation.
template <typename F>
auto AsUsage(F &&f) -> decltype(f()) {
  try {
    return f();
  } catch (const DomainError &e) {
    throw UsageError(e.what());
  }
}

std::vector<std::size_t> ParseClassList(const std::string &text, std::size_t classes) {
  std::vector<std::size_t> ids;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = Trim(item);
    const std::size_t id = AsUsage([&] { return ParseUnsigned(std::string("--classes"), item); });
    if (id >= classes) {
      throw UsageError("unknown class id " + std::to_string(id) + " (model has " + std::to_string(classes) +
                       " classes)");
    }
    if (std::find(ids.begin(), ids.end(), id) != ids.end()) {
      throw UsageError("class id " + std::to_string(id) + " is listed twice");
    }
    ids.push_back(id);
  }
  if (ids.empty()) throw UsageError("--classes needs at least one class id");
  return ids;
}

// Entries of a split; WAV pools are paired into mixtures first.
std::vector<data::ManifestEntry> SplitEntries(const data::DatasetManifest &m, const std::string &split,
                                              const train::WavPairing &pairing) {
  if (m.kind == data::DatasetManifest::Kind::kWavPool) {
    const std::size_t count = pairing.count ? pairing.count : m.Split(split).size();
    return data::PairWavEntries(m, split, count, pairing.sources, pairing.seed);
  }
  std::vector<data::ManifestEntry> out;
  for (const auto *e : m.Split(split)) out.push_back(*e);
  return out;
}

void CheckCompatible(const model::SgnConfig &mc, const data::DatasetManifest &m) {
  if (mc.classes != m.classes || mc.grid != m.frames) {
    throw IncompatibleError("checkpoint expects " + std::to_string(mc.classes) + " classes and " +
                            std::to_string(mc.grid) + " frames; manifest has " + std::to_string(m.classes) +
                            " and " + std::to_string(m.frames));
  }
}

void Concat(dsp::Grid &dst, const dsp::Grid &block, std::size_t chunk) {
  dst.middleCols(static_cast<Eigen::Index>(chunk * block.cols()), block.cols()) = block;
}

// ---------------------------------------------------------------------------

struct GendataFlags {
  std::size_t classes = 4;
  std::size_t train = 512;
  std::size_t val = 64;
  std::size_t test = 64;
  std::size_t sources = 2;
  std::size_t frames = 64;
  std::uint64_t seed = 7;
  std::string wav_root;
  std::string out;
};

int Gendata(const GendataFlags &f, RunConfig rc, std::ostream &out) {
  if (f.frames == 0) throw UsageError("--frames must be positive");
  data::DatasetManifest m;
  if (!f.wav_root.empty()) {
    const auto scan = data::LoadWavDataset(f.wav_root, f.frames);
    if (scan.warnings) out << "skipped " << scan.warnings << " unreadable or non-WAV files\n";
    m = scan.manifest;
  } else {
    if (f.classes == 0 || f.sources == 0) throw UsageError("--classes and --sources must be positive");
    if (f.sources > f.classes) {
      throw UsageError("N must not exceed C (--sources " + std::to_string(f.sources) + ", --classes " +
                       std::to_string(f.classes) + ")");
    }
    m = data::BuildDataset(f.classes, {f.train, f.val, f.test}, f.sources, f.seed, f.frames);
  }
  const fs::path dir = ResolveOut(f.out, "gendata");
  const fs::path manifest = dir / "manifest.tsv";
  rc.run["classes"] = std::to_string(f.classes);
  rc.run["frames"] = std::to_string(f.frames);
  rc.run["out"] = dir.string();
  rc.run["seed"] = std::to_string(f.seed);
  rc.run["sources"] = std::to_string(f.sources);
  rc.run["split.train"] = std::to_string(f.train);
  rc.run["split.val"] = std::to_string(f.val);
  rc.run["split.test"] = std::to_string(f.test);
  if (!f.wav_root.empty()) rc.run["wav_root"] = f.wav_root;
  WriteRunConfig(rc, dir, out);
  data::WriteManifest(m, manifest);
  std::size_t total = 0;
  for (const char *split : {"train", "val", "test"}) {
    const std::size_t n = m.Split(split).size();
    total += n;
    out << split << " " << n << "\n";
  }
  out << "total " << total << "\n"
      << "manifest: " << manifest.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct TrainFlags {
  std::string manifest;
  std::string config;
  std::string out;
  std::optional<std::size_t> epochs;
  std::optional<std::uint64_t> seed;
  std::optional<double> lr;
  std::optional<double> momentum;
  std::optional<std::size_t> batch_size;
  std::optional<std::size_t> save_interval;
  std::string grouping;
  bool no_sct = false;
  bool no_cag = false;
  bool reference = false;
  std::size_t sources = 2;
  std::size_t pair_count = 0;
};

int TrainCmd(const TrainFlags &f, RunConfig rc, std::ostream &out) {
  rc.has_model = rc.has_train = true;
  rc.model = f.reference ? model::SgnConfig::Reference() : model::SgnConfig::Desk();
  std::set<std::string> assigned;
  if (!f.config.empty()) AsUsage([&] { rc.ApplyText(ReadText(f.config), &assigned); });
  if (f.epochs) rc.train.epochs = *f.epochs;
  if (f.seed) rc.train.seed = *f.seed;
  if (f.lr) rc.train.lr = *f.lr;
  if (f.momentum) rc.train.momentum = *f.momentum;
  if (f.batch_size) rc.train.batch_size = *f.batch_size;
  if (f.save_interval) rc.train.save_interval = *f.save_interval;
  if (f.no_sct) rc.model.use_sct = false;
  if (f.no_cag) rc.model.use_cag = false;
  if (!f.grouping.empty()) rc.model.grouping = AsUsage([&] { return model::ParseGroupingMode(f.grouping); });
  if (!f.manifest.empty()) rc.run["manifest"] = f.manifest;
  if (!rc.run.count("manifest")) throw UsageError("--manifest is required");

  const auto manifest = data::ReadManifest(rc.run["manifest"]);
  if (assigned.count("model.classes") && rc.model.classes != manifest.classes) {
    throw UsageError("config sets model.classes=" + std::to_string(rc.model.classes) + " but the manifest has " +
                     std::to_string(manifest.classes) + " classes");
  }
  if (assigned.count("model.grid") && rc.model.grid != manifest.frames) {
    throw UsageError("config sets model.grid=" + std::to_string(rc.model.grid) + " but the manifest has " +
                     std::to_string(manifest.frames) + " frames");
  }
  rc.model.classes = manifest.classes;
  rc.model.grid = manifest.frames;
  AsUsage([&] {
    rc.model.Validate();
    rc.train.Validate();
  });

  const fs::path dir = ResolveOut(f.out.empty() && rc.run.count("out") ? rc.run["out"] : f.out, "train");
  rc.run["out"] = dir.string();
  rc.run["pair_count"] = std::to_string(f.pair_count);
  rc.run["sources"] = std::to_string(f.sources);
  WriteRunConfig(rc, dir, out);

  const model::Frontend frontend(rc.model.grid);
  const auto samples =
      train::LoadSplit(manifest, "train", frontend.clip_length(), {f.sources, f.pair_count, rc.train.seed});
  if (samples.empty()) throw Error("the manifest has no training entries");
  std::vector<train::Example> examples;
  examples.reserve(samples.size());
  for (const auto &s : samples) examples.push_back(train::MakeExample(s, frontend, rc.train.mask_threshold_ratio));
  out << "training on " << examples.size() << " mixtures\n" << train::kMetricsHeader << "\n";

  model::SemanticGroupingNet net(rc.model, rc.train.seed);
  train::FitOptions opts;
  opts.metrics_csv = dir / "metrics.csv";
  opts.checkpoint = dir / "model.ckpt";
  opts.on_epoch = [&](const train::EpochMetrics &m) { out << train::FormatMetricsRow(m) << std::endl; };
  train::Fit(net, examples, rc.train, opts);
  out << "checkpoint: " << opts.checkpoint.string() << "\n"
      << "metrics: " << opts.metrics_csv.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct SelectFlags {
  bool predicted = false;
  std::optional<std::size_t> topk;
  std::optional<double> threshold;
};

model::ClassSelection Select(const SelectFlags &f, std::span<const double> presence) {
  if (f.topk) {
    if (*f.topk == 0 || *f.topk > presence.size()) {
      throw UsageError("--topk must be in [1, " + std::to_string(presence.size()) + "]");
    }
    return model::InferClassIds(presence, model::SelectionMode::kTopK, *f.topk);
  }
  return model::InferClassIds(presence, model::SelectionMode::kThreshold, 1, f.threshold.value_or(0.5));
}

struct SeparateFlags {
  std::string checkpoint;
  std::string input;
  std::string classes;
  SelectFlags select;
  bool no_fallback = false;
  bool binarize = false;
  bool spectrograms = false;
  std::string out;
};

int SeparateCmd(const SeparateFlags &f, RunConfig rc, std::ostream &out, std::ostream &err) {
  if (f.classes.empty() && !f.select.predicted) throw UsageError("give --classes or --predicted-classes");
  const auto net = train::LoadCheckpoint(f.checkpoint);
  const auto &mc = net->config();
  const model::Frontend frontend(mc.grid);
  std::vector<std::size_t> ids;
  if (!f.classes.empty()) ids = ParseClassList(f.classes, mc.classes);

  dsp::Waveform input = dsp::LoadWav(f.input);
  if (input.sample_rate_hz != dsp::kSampleRate) input = dsp::ResampleLinear(input, dsp::kSampleRate);
  dsp::Validate(input);
  const std::size_t n = input.size();
  const std::size_t clip = frontend.clip_length();
  const std::size_t chunks = std::max<std::size_t>(1, (n + clip - 1) / clip);
  std::vector<dsp::Waveform> pieces(chunks);
  for (std::size_t c = 0; c < chunks; ++c) {
    pieces[c].samples.assign(clip, 0.0);
    const std::size_t begin = c * clip, end = std::min(n, begin + clip);
    std::copy(input.samples.begin() + static_cast<std::ptrdiff_t>(begin),
              input.samples.begin() + static_cast<std::ptrdiff_t>(end), pieces[c].samples.begin());
  }

  // Presence is averaged over the clips of a long input.
  std::vector<double> presence(mc.classes, 0.0);
  for (const auto &p : pieces) {
    const auto pc = model::PredictPresence(*net, frontend, p);
    for (std::size_t i = 0; i < presence.size(); ++i) presence[i] += pc[i] / double(chunks);
  }
  for (std::size_t i = 0; i < presence.size(); ++i) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "presence class %zu: %.4f\n", i, presence[i]);
    out << buf;
  }
  if (ids.empty()) {
    const auto sel = Select(f.select, presence);
    if (sel.fallback) {
      if (f.no_fallback) {
        err << "no class reached the presence threshold\n";
        return kExitDegenerate;
      }
      out << "no class reached the threshold; falling back to the most likely class\n";
    }
    ids = sel.class_ids;
  }

  const fs::path dir = ResolveOut(f.out, "separate");
  rc.run["binarize"] = f.binarize ? "true" : "false";
  rc.run["checkpoint"] = f.checkpoint;
  std::string id_text;
  for (std::size_t id : ids) id_text += (id_text.empty() ? "" : ",") + std::to_string(id);
  rc.run["classes"] = id_text;
  rc.run["input"] = f.input;
  rc.run["out"] = dir.string();
  rc.model = mc;
  rc.has_model = true;
  WriteRunConfig(rc, dir, out);

  const std::size_t count = ids.size();
  const auto rows = static_cast<Eigen::Index>(mc.grid);
  const auto cols = static_cast<Eigen::Index>(mc.grid * chunks);
  std::vector<dsp::Waveform> outputs(count);
  std::vector<dsp::Grid> mask_images(count, dsp::Grid::Zero(rows, cols));
  dsp::Grid mixture_image = dsp::Grid::Zero(rows, cols);
  double worst_ratio = 0;
  model::SeparationOptions so;
  so.binarize = f.binarize;
  for (std::size_t c = 0; c < chunks; ++c) {
    const auto sep = model::Separate(*net, frontend, pieces[c], ids, so);
    const dsp::Spectrogram spec = frontend.Analyze(pieces[c]);
    Concat(mixture_image, spec.warped, c);
    // Masks lie in [0, 1], so the masked magnitudes of the N sources sum to
    // at most N times the mixture magnitude in every bin.
    dsp::Grid total = dsp::Grid::Zero(spec.magnitude.rows(), spec.magnitude.cols());
    for (std::size_t k = 0; k < count; ++k) {
      Concat(mask_images[k], sep.masks.MaskGrid(k), c);
      const dsp::Grid m = frontend.warp().Unwarp(sep.masks.MaskGrid(k)).cwiseMax(0.0).cwiseMin(1.0);
      total += m.cwiseProduct(spec.magnitude);
      auto &o = outputs[k].samples;
      o.insert(o.end(), sep.estimates[k].samples.begin(), sep.estimates[k].samples.end());
    }
    for (Eigen::Index i = 0; i < total.size(); ++i) {
      const double mix = spec.magnitude.data()[i];
      if (mix > 0) worst_ratio = std::max(worst_ratio, total.data()[i] / (double(count) * mix));
    }
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "mask bound: max over bins of sum |S_k| / (N |X|) = %.4f (%s)\n", worst_ratio,
                worst_ratio <= 1 + 1e-12 ? "ok" : "VIOLATED");
  out << buf;

  for (std::size_t k = 0; k < count; ++k) {
    outputs[k].samples.resize(n);
    const std::string stem = "out_src" + std::to_string(k) + "_class" + std::to_string(ids[k]);
    dsp::SaveWav(outputs[k], dir / (stem + ".wav"));
    out << "wrote " << (dir / (stem + ".wav")).string() << "\n";
    if (f.spectrograms) dsp::SavePgm(mask_images[k], dir / (stem + "_mask.pgm"));
  }
  if (f.spectrograms) {
    dsp::SavePgm(mixture_image, dir / "mixture.pgm");
    out << "wrote " << (dir / "mixture.pgm").string() << " and " << count << " mask images\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct DataFlags {
  std::string manifest;
  std::string split = "test";
  std::size_t sources = 2;
  std::size_t pair_count = 0;
  std::uint64_t seed = 0;
};

struct EvalFlags {
  std::string checkpoint;
  DataFlags data;
  std::string oracle;
  bool baseline = false;
  SelectFlags select;
  bool binarize = false;
  bool skip_bad = false;
  double ratio = 0.5;
  std::string csv;
  std::string out;
};

int EvalCmd(const EvalFlags &f, RunConfig rc, std::ostream &out) {
  metrics::EvalOptions opts;
  if (!f.oracle.empty()) {
    if (f.oracle != "ibm") throw UsageError("unknown oracle '" + f.oracle + "' (supported: ibm)");
    opts.method = metrics::Method::kOracleIbm;
  } else if (f.baseline) {
    opts.method = metrics::Method::kBaseline;
  } else if (f.checkpoint.empty()) {
    throw UsageError("--checkpoint is required unless --oracle or --baseline is given");
  }
  if (f.select.predicted) {
    opts.classes = f.select.topk ? metrics::ClassSource::kTopK : metrics::ClassSource::kThreshold;
    opts.topk = f.select.topk.value_or(1);
    opts.threshold = f.select.threshold.value_or(0.5);
  }
  opts.binarize = f.binarize;
  opts.skip_bad = f.skip_bad;
  opts.mask_threshold_ratio = f.ratio;

  const auto manifest = data::ReadManifest(f.data.manifest);
  std::unique_ptr<model::SemanticGroupingNet> net;
  if (opts.method == metrics::Method::kModel) {
    net = train::LoadCheckpoint(f.checkpoint);
    CheckCompatible(net->config(), manifest);
    if (f.select.topk && (*f.select.topk == 0 || *f.select.topk > manifest.classes)) {
      throw UsageError("--topk must be in [1, " + std::to_string(manifest.classes) + "]");
    }
  }
  const model::Frontend frontend(manifest.frames);
  const auto entries = SplitEntries(manifest, f.data.split, {f.data.sources, f.data.pair_count, f.data.seed});

  const fs::path dir = ResolveOut(f.out, "eval");
  const fs::path csv = f.csv.empty() ? dir / "eval.csv" : fs::path(f.csv);
  rc.run["binarize"] = f.binarize ? "true" : "false";
  rc.run["checkpoint"] = f.checkpoint;
  rc.run["classes"] = f.select.predicted ? (f.select.topk ? "topk" : "threshold") : "ground_truth";
  rc.run["csv"] = csv.string();
  rc.run["manifest"] = f.data.manifest;
  rc.run["method"] = f.oracle.empty() ? (f.baseline ? "baseline" : "model") : "oracle_ibm";
  rc.run["out"] = dir.string();
  rc.run["skip_bad"] = f.skip_bad ? "true" : "false";
  rc.run["split"] = f.data.split;
  if (f.select.topk) rc.run["topk"] = std::to_string(*f.select.topk);
  if (f.select.threshold) rc.run["threshold"] = std::to_string(*f.select.threshold);
  WriteRunConfig(rc, dir, out);

  if (entries.empty()) {
    out << "split '" << f.data.split << "' has no entries\n";
    return kExitDegenerate;
  }
  const auto result = metrics::Evaluate(
      net.get(), frontend, entries.size(),
      [&](std::size_t i) { return data::Realize(manifest, entries[i], frontend.clip_length()); }, opts);
  metrics::WriteEvalCsv(result, csv);
  char buf[256];
  std::snprintf(buf, sizeof buf, "#MEAN si_sdr=%.4f sdr=%.4f sir=%.4f sar=%.4f\n", result.mean_si_sdr,
                result.mean_sdr, result.mean_sir, result.mean_sar);
  out << "samples " << result.samples << ", skipped " << result.skipped << ", rows " << result.rows.size()
      << "\n"
      << buf << "csv: " << csv.string() << "\n";
  return result.samples == 0 ? kExitDegenerate : kExitOk;
}

// ---------------------------------------------------------------------------

struct ExportFlags {
  std::string checkpoint;
  DataFlags data;
  std::string csv;
  std::string out;
};

int ExportCmd(const ExportFlags &f, RunConfig rc, std::ostream &out) {
  const auto manifest = data::ReadManifest(f.data.manifest);
  const auto net = train::LoadCheckpoint(f.checkpoint);
  const auto &mc = net->config();
  CheckCompatible(mc, manifest);
  const model::Frontend frontend(mc.grid);
  const auto entries = SplitEntries(manifest, f.data.split, {f.data.sources, f.data.pair_count, f.data.seed});

  const fs::path dir = ResolveOut(f.out, "export-embeddings");
  const fs::path csv = f.csv.empty() ? dir / "embeddings.csv" : fs::path(f.csv);
  rc.run["checkpoint"] = f.checkpoint;
  rc.run["csv"] = csv.string();
  rc.run["manifest"] = f.data.manifest;
  rc.run["out"] = dir.string();
  rc.run["split"] = f.data.split;
  WriteRunConfig(rc, dir, out);

  std::ofstream os(csv, std::ios::binary);
  if (!os) throw Error("cannot write '" + csv.string() + "'");
  os << "sample_id,class_id";
  for (std::size_t d = 0; d < mc.dim; ++d) os << ",g" << d;
  os << "\n";
  ad::NoGradGuard no_grad;
  std::size_t rows = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto sample = data::Realize(manifest, entries[i], frontend.clip_length());
    const auto input = model::PrepareInput(frontend.Analyze(sample.mixture).warped);
    const auto r = net->Forward(input, {});
    const auto g = r.grouping.g.data();
    std::vector<std::size_t> present = sample.class_ids;
    std::sort(present.begin(), present.end());
    for (std::size_t c : present) {
      os << i << "," << c;
      char buf[32];
      for (std::size_t d = 0; d < mc.dim; ++d) {
        std::snprintf(buf, sizeof buf, ",%.9g", g[c * mc.dim + d]);
        os << buf;
      }
      os << "\n";
      ++rows;
    }
  }
  if (!os) throw Error("write failed for '" + csv.string() + "'");
  out << "rows " << rows << "\ncsv: " << csv.string() << "\n";
  return kExitOk;
}

void AddDataFlags(CLI::App *cmd, DataFlags &f) {
  cmd->add_option("--manifest", f.manifest, "Dataset manifest")->required();
  cmd->add_option("--split", f.split, "Manifest split")->capture_default_str();
  cmd->add_option("--sources", f.sources, "Sources per mixture when pairing a WAV pool")->capture_default_str();
  cmd->add_option("--pair-count", f.pair_count, "Mixtures to pair from a WAV pool (0: one per entry)");
  cmd->add_option("--seed", f.seed, "Seed for WAV pool pairing")->capture_default_str();
}

void AddSelectFlags(CLI::App *cmd, SelectFlags &f) {
  auto *pred = cmd->add_flag("--predicted-classes", f.predicted, "Select classes from predicted presence");
  auto *topk = cmd->add_option("--topk", f.topk, "Keep the k most likely classes")->needs(pred);
  cmd->add_option("--threshold", f.threshold, "Keep classes with presence above this value (default 0.5)")
      ->needs(pred)
      ->excludes(topk);
}

}  // namespace

std::string RunConfig::ToText() const {
  std::string out = "command=" + command + "\n";
  for (const auto &[k, v] : run) out += "run." + k + "=" + v + "\n";
  if (has_model) out += Prefixed("model.", model.ToText());
  if (has_train) out += Prefixed("train.", train.ToText());
  return out;
}

void RunConfig::Set(const std::string &key, const std::string &value) {
  if (key == "command") {
    command = value;
  } else if (key.starts_with("run.")) {
    run[key.substr(4)] = value;
  } else if (key.starts_with("model.")) {
    model.Set(key.substr(6), value);
    has_model = true;
  } else if (key.starts_with("train.")) {
    train.Set(key.substr(6), value);
    has_train = true;
  } else {
    throw DomainError("config key '" + key + "' needs a run., model. or train. prefix");
  }
}

void RunConfig::ApplyText(const std::string &text, std::set<std::string> *assigned) {
  ForEachKeyValue(text, [&](const std::string &k, const std::string &v) {
    Set(k, v);
    if (assigned) assigned->insert(k);
  });
}

fs::path DefaultRunRoot() {
  const char *env = std::getenv("SGN_RUN_DIR");
  return env && *env ? fs::path(env) : fs::path("runs");
}

int Run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  CLI::App app{"Semantic grouping network for audio source separation", "sgn"};
  app.require_subcommand(1);
  app.fallthrough();
  std::size_t threads = 1;
  app.add_option("--threads", threads, "Worker thread cap")->check(CLI::PositiveNumber)->capture_default_str();

  GendataFlags gf;
  auto *gendata = app.add_subcommand("gendata", "Generate a synthetic dataset manifest");
  gendata->add_option("--classes", gf.classes, "Number of source classes C")->capture_default_str();
  gendata->add_option("--train", gf.train, "Training mixtures")->capture_default_str();
  gendata->add_option("--val", gf.val, "Validation mixtures")->capture_default_str();
  gendata->add_option("--test", gf.test, "Test mixtures")->capture_default_str();
  gendata->add_option("--sources", gf.sources, "Sources per mixture N")->capture_default_str();
  gendata->add_option("--frames", gf.frames, "STFT frames per clip")->capture_default_str();
  gendata->add_option("--seed", gf.seed, "Generation seed")->capture_default_str();
  gendata->add_option("--wav-root", gf.wav_root, "Index root/<class>/*.wav instead of synthesizing");
  gendata->add_option("--out", gf.out, "Output directory");

  TrainFlags tf;
  auto *train_cmd = app.add_subcommand("train", "Train a model");
  train_cmd->add_option("--manifest", tf.manifest, "Dataset manifest");
  train_cmd->add_option("--config", tf.config, "key=value config file (run./model./train. keys)");
  train_cmd->add_option("--epochs", tf.epochs, "Training epochs");
  train_cmd->add_option("--seed", tf.seed, "Seed for initialization, shuffling and noise");
  train_cmd->add_option("--lr", tf.lr, "Learning rate");
  train_cmd->add_option("--momentum", tf.momentum, "SGD momentum");
  train_cmd->add_option("--batch-size", tf.batch_size, "Mixtures per update");
  train_cmd->add_option("--save-interval", tf.save_interval, "Epochs between checkpoints (0: final only)");
  train_cmd->add_option("--grouping", tf.grouping, "softmax or hard");
  train_cmd->add_flag("--no-sct", tf.no_sct, "Freeze class tokens and drop the token loss");
  train_cmd->add_flag("--no-cag", tf.no_cag, "Pool features uniformly instead of by assignment");
  train_cmd->add_flag("--paper-config", tf.reference, "Start from the full-size model preset");
  train_cmd->add_option("--sources", tf.sources, "Sources per mixture when pairing a WAV pool");
  train_cmd->add_option("--pair-count", tf.pair_count, "Mixtures to pair from a WAV pool (0: one per entry)");
  train_cmd->add_option("--out", tf.out, "Output directory");

  SeparateFlags sf;
  auto *separate = app.add_subcommand("separate", "Separate a WAV file");
  separate->add_option("--checkpoint", sf.checkpoint, "Model checkpoint")->required();
  separate->add_option("--input", sf.input, "Input WAV")->required();
  auto *classes_opt = separate->add_option("--classes", sf.classes, "Comma-separated class ids");
  AddSelectFlags(separate, sf.select);
  classes_opt->excludes("--predicted-classes");
  separate->add_flag("--no-fallback", sf.no_fallback, "Exit 3 instead of falling back to top-1");
  separate->add_flag("--binarize", sf.binarize, "Threshold masks at 0.5");
  separate->add_flag("--emit-spectrograms", sf.spectrograms, "Write PGM images of the mixture and masks");
  separate->add_option("--out", sf.out, "Output directory");

  EvalFlags ef;
  auto *eval = app.add_subcommand("eval", "Score separation on a manifest split");
  eval->add_option("--checkpoint", ef.checkpoint, "Model checkpoint");
  AddDataFlags(eval, ef.data);
  auto *oracle = eval->add_option("--oracle", ef.oracle, "Score an oracle instead of the model (ibm)");
  eval->add_flag("--baseline", ef.baseline, "Score the mixture as every estimate")->excludes(oracle);
  AddSelectFlags(eval, ef.select);
  eval->add_flag("--binarize", ef.binarize, "Threshold model masks at 0.5");
  eval->add_flag("--skip-bad", ef.skip_bad, "Skip unreadable samples instead of failing");
  eval->add_option("--mask-threshold-ratio", ef.ratio, "Oracle mask threshold ratio")->capture_default_str();
  eval->add_option("--csv", ef.csv, "Per-source metrics CSV (default <out>/eval.csv)");
  eval->add_option("--out", ef.out, "Output directory");

  ExportFlags xf;
  auto *exp = app.add_subcommand("export-embeddings", "Write per-class group embeddings");
  exp->add_option("--checkpoint", xf.checkpoint, "Model checkpoint")->required();
  AddDataFlags(exp, xf.data);
  exp->add_option("--csv", xf.csv, "Output CSV (default <out>/embeddings.csv)");
  exp->add_option("--out", xf.out, "Output directory");

  std::vector<const char *> argv;
  for (const auto &a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  Eigen::setNbThreads(static_cast<int>(threads));
  RunConfig rc;
  rc.run["threads"] = std::to_string(threads);
  try {
    if (gendata->parsed()) {
      rc.command = "gendata";
      return Gendata(gf, rc, out);
    }
    if (train_cmd->parsed()) {
      rc.command = "train";
      return TrainCmd(tf, rc, out);
    }
    if (separate->parsed()) {
      rc.command = "separate";
      return SeparateCmd(sf, rc, out, err);
    }
    if (eval->parsed()) {
      rc.command = "eval";
      return EvalCmd(ef, rc, out);
    }
    rc.command = "export-embeddings";
    return ExportCmd(xf, rc, out);
  } catch (const UsageError &e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace sgn::cli
