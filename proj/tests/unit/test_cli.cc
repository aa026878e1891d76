// Copyright 2026 The SGN Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "sgn/cli/commands.h"
#include "sgn/data/dataset.h"
#include "sgn/dsp/audio.h"

using namespace sgn;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string &name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome Cli(std::vector<std::string> args) {
  args.insert(args.begin(), "sgn");
  std::ostringstream out, err;
  const int code = cli::Run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string Slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::vector<std::string>> ReadCsv(const fs::path &p) {
  std::ifstream in(p);
  std::string line;
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

constexpr const char *kTinyConfig =
    "model.dim=8\nmodel.depth=2\nmodel.heads=2\nmodel.patch=4\nmodel.unet_depth=2\n"
    "model.unet_base_channels=4\nmodel.unet_max_channels=8\ntrain.batch_size=4\ntrain.lr=0.01\n";

// A tiny synthetic dataset plus a config file; frames 16 matches the tiny model.
struct TinyRun {
  TempDir dir;
  fs::path manifest, config;
  explicit TinyRun(const std::string &name, std::size_t train = 24, std::size_t test = 6)
      : dir(name), manifest(dir.path / "data" / "manifest.tsv"), config(dir.path / "tiny.cfg") {
    const auto r = Cli({"gendata", "--classes", "3", "--train", std::to_string(train), "--val", "2", "--test",
                        std::to_string(test), "--frames", "16", "--seed", "3", "--out",
                        (dir.path / "data").string()});
    REQUIRE(r.code == 0);
    std::ofstream(config) << kTinyConfig;
  }
  Outcome Train(const std::string &out, const std::vector<std::string> &extra = {}) const {
    std::vector<std::string> args{"train", "--manifest", manifest.string(), "--config", config.string(),
                                  "--out", (dir.path / out).string()};
    args.insert(args.end(), extra.begin(), extra.end());
    return Cli(args);
  }
};

void WriteTone(const fs::path &p, double hz, std::size_t n) {
  dsp::Waveform w;
  for (std::size_t i = 0; i < n; ++i) w.samples.push_back(0.4 * std::sin(2 * M_PI * hz * i / dsp::kSampleRate));
  dsp::SaveWav(w, p);
}

}  // namespace

TEST_CASE("gendata reports split sizes and is reproducible") {
  TempDir dir("sgn_cli_gendata");
  const auto a = Cli({"gendata", "--classes", "4", "--train", "512", "--val", "64", "--test", "64", "--seed", "7",
                      "--out", (dir.path / "a").string()});
  REQUIRE(a.code == 0);
  CHECK(a.out.find("train 512\nval 64\ntest 64\ntotal 640\n") != std::string::npos);
  const auto m = data::ReadManifest(dir.path / "a" / "manifest.tsv");
  CHECK(m.entries.size() == 640);
  CHECK(Cli({"gendata", "--classes", "4", "--train", "512", "--val", "64", "--test", "64", "--seed", "7", "--out",
             (dir.path / "b").string()})
            .code == 0);
  CHECK(Slurp(dir.path / "a" / "manifest.tsv") == Slurp(dir.path / "b" / "manifest.tsv"));
  CHECK(Slurp(dir.path / "a" / "run_config.txt").find("run.seed=7\n") != std::string::npos);
}

TEST_CASE("usage errors exit with code 2") {
  TempDir dir("sgn_cli_usage");
  const auto r = Cli({"gendata", "--sources", "5", "--classes", "4", "--out", dir.path.string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("N must not exceed C") != std::string::npos);
  CHECK(Cli({}).code == 2);
  CHECK(Cli({"gendata", "--bogus"}).code == 2);
  CHECK(Cli({"gendata", "--classes", "x"}).code == 2);
  CHECK(Cli({"train"}).code == 2);
  CHECK(Cli({"eval", "--manifest", "m.tsv", "--topk", "2"}).code == 2);
  CHECK(Cli({"--help"}).code == 0);
}

TEST_CASE("train writes one metrics row per epoch and honours the seed") {
  TinyRun run("sgn_cli_train");
  const auto a = run.Train("a", {"--epochs", "3", "--seed", "5"});
  REQUIRE_MESSAGE(a.code == 0, a.err);
  const auto b = run.Train("b", {"--epochs", "3", "--seed", "5"});
  REQUIRE(b.code == 0);
  const auto csv = Slurp(run.dir.path / "a" / "metrics.csv");
  CHECK(ReadCsv(run.dir.path / "a" / "metrics.csv").size() == 4);
  CHECK(csv == Slurp(run.dir.path / "b" / "metrics.csv"));
  CHECK(Slurp(run.dir.path / "a" / "model.ckpt") == Slurp(run.dir.path / "b" / "model.ckpt"));
  CHECK(run.Train("c", {"--epochs", "3", "--seed", "6"}).code == 0);
  CHECK(csv != Slurp(run.dir.path / "c" / "metrics.csv"));

  // The echoed config reproduces the run on its own.
  const fs::path echoed = run.dir.path / "a" / "run_config.txt";
  const std::string text = Slurp(echoed);
  CHECK(text.find("train.epochs=3\n") != std::string::npos);
  CHECK(text.find("train.seed=5\n") != std::string::npos);
  CHECK(text.find("model.classes=3\n") != std::string::npos);
  const auto d = Cli({"train", "--config", echoed.string(), "--out", (run.dir.path / "d").string()});
  REQUIRE_MESSAGE(d.code == 0, d.err);
  CHECK(Slurp(run.dir.path / "d" / "metrics.csv") == csv);
}

TEST_CASE("train flag precedence and ablation presets") {
  TinyRun run("sgn_cli_train_flags");
  // Flags override the config file.
  REQUIRE(run.Train("lr", {"--epochs", "1", "--lr", "0.002", "--no-sct", "--no-cag", "--grouping", "hard"}).code ==
          0);
  cli::RunConfig rc;
  rc.ApplyText(Slurp(run.dir.path / "lr" / "run_config.txt"));
  CHECK(rc.train.lr == 0.002);
  CHECK(rc.train.batch_size == 4);
  CHECK_FALSE(rc.model.use_sct);
  CHECK_FALSE(rc.model.use_cag);
  CHECK(rc.model.grouping == model::GroupingMode::kGumbelHard);

  // Classes and grid come from the manifest; a contradicting config is a usage error.
  std::ofstream(run.dir.path / "bad.cfg") << kTinyConfig << "model.classes=5\n";
  const auto bad = Cli({"train", "--manifest", run.manifest.string(), "--config",
                        (run.dir.path / "bad.cfg").string(), "--out", (run.dir.path / "bad").string()});
  CHECK(bad.code == 2);
  CHECK(bad.err.find("model.classes") != std::string::npos);
  CHECK(run.Train("g", {"--grouping", "argmax"}).code == 2);
  // The full-size preset does not fit a 16-frame grid.
  CHECK(Cli({"train", "--manifest", run.manifest.string(), "--paper-config", "--out",
             (run.dir.path / "p").string()})
            .code == 2);
}

TEST_CASE("non-finite training exits with code 1 and a diagnostic") {
  TinyRun run("sgn_cli_nan");
  const auto r = run.Train("nan", {"--epochs", "3", "--lr", "1e300"});
  CHECK(r.code == 1);
  CHECK(r.err.find("non-finite") != std::string::npos);
  CHECK(r.err.find("epoch") != std::string::npos);
}

TEST_CASE("separate writes one WAV per selected class") {
  TinyRun run("sgn_cli_separate");
  REQUIRE(run.Train("m", {"--epochs", "2"}).code == 0);
  const fs::path ckpt = run.dir.path / "m" / "model.ckpt";
  // Longer than one clip so the chunked path is exercised.
  const fs::path input = run.dir.path / "in.wav";
  WriteTone(input, 700, 9001);

  const fs::path out = run.dir.path / "sep";
  const auto r = Cli({"separate", "--checkpoint", ckpt.string(), "--input", input.string(), "--classes", "0,2",
                      "--emit-spectrograms", "--out", out.string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  std::size_t wavs = 0;
  for (const auto &e : fs::directory_iterator(out)) wavs += e.path().extension() == ".wav";
  CHECK(wavs == 2);
  for (const char *name : {"out_src0_class0.wav", "out_src1_class2.wav"}) {
    CHECK(dsp::LoadWav(out / name).size() == 9001);
  }
  CHECK(r.out.find("(ok)") != std::string::npos);
  const std::string pgm = Slurp(out / "mixture.pgm");
  CHECK(pgm.rfind("P5\n" + std::to_string(16 * 3) + " 16\n255\n", 0) == 0);
  CHECK(fs::exists(out / "out_src1_class2_mask.pgm"));

  const auto top3 = Cli({"separate", "--checkpoint", ckpt.string(), "--input", input.string(),
                         "--predicted-classes", "--topk", "3", "--out", (run.dir.path / "top3").string()});
  CHECK(top3.code == 0);
  CHECK(fs::exists(run.dir.path / "top3" / "out_src2_class2.wav"));

  CHECK(Cli({"separate", "--checkpoint", ckpt.string(), "--input", input.string(), "--classes", "0,3", "--out",
             (run.dir.path / "x").string()})
            .code == 2);
  CHECK(Cli({"separate", "--checkpoint", ckpt.string(), "--input", input.string(), "--classes", "0",
             "--predicted-classes", "--out", (run.dir.path / "x").string()})
            .code == 2);
  const auto none = Cli({"separate", "--checkpoint", ckpt.string(), "--input", input.string(),
                         "--predicted-classes", "--threshold", "1", "--no-fallback", "--out",
                         (run.dir.path / "none").string()});
  CHECK(none.code == 3);
  CHECK(Cli({"separate", "--checkpoint", ckpt.string(), "--input", input.string(), "--predicted-classes",
             "--threshold", "1", "--out", (run.dir.path / "fallback").string()})
            .code == 0);
  CHECK(Cli({"separate", "--checkpoint", (run.dir.path / "missing.ckpt").string(), "--input", input.string(),
             "--classes", "0", "--out", (run.dir.path / "x").string()})
            .code == 1);
}

TEST_CASE("eval rows, summary and method ordering") {
  TinyRun run("sgn_cli_eval", 24, 8);
  REQUIRE(run.Train("m", {"--epochs", "2"}).code == 0);
  const std::string ckpt = (run.dir.path / "m" / "model.ckpt").string();
  const auto model_run =
      Cli({"eval", "--checkpoint", ckpt, "--manifest", run.manifest.string(), "--out", (run.dir.path / "e").string()});
  REQUIRE_MESSAGE(model_run.code == 0, model_run.err);
  const auto rows = ReadCsv(run.dir.path / "e" / "eval.csv");
  REQUIRE(rows.size() == 1 + 8 * 2 + 1);
  CHECK(rows.front() == std::vector<std::string>{"sample_id", "source_index", "class_id", "si_sdr", "sdr", "sir",
                                                 "sar"});
  CHECK(rows.back()[0] == "#MEAN");
  for (std::size_t col = 3; col < 7; ++col) {
    double sum = 0;
    for (std::size_t i = 1; i + 1 < rows.size(); ++i) sum += std::stod(rows[i][col]);
    CHECK(std::stod(rows.back()[col]) == doctest::Approx(sum / 16).epsilon(1e-6));
  }

  auto mean_si_sdr = [&](const std::vector<std::string> &flags, const std::string &out) {
    std::vector<std::string> args{"eval", "--manifest", run.manifest.string(), "--out",
                                  (run.dir.path / out).string()};
    args.insert(args.end(), flags.begin(), flags.end());
    const auto r = Cli(args);
    REQUIRE_MESSAGE(r.code == 0, r.err);
    return std::stod(ReadCsv(run.dir.path / out / "eval.csv").back()[3]);
  };
  CHECK(mean_si_sdr({"--oracle", "ibm"}, "oracle") > mean_si_sdr({"--baseline"}, "baseline"));
  CHECK(Cli({"eval", "--manifest", run.manifest.string(), "--oracle", "wiener"}).code == 2);
  CHECK(Cli({"eval", "--manifest", run.manifest.string(), "--out", (run.dir.path / "x").string()}).code == 2);
  const auto empty = Cli({"eval", "--baseline", "--manifest", run.manifest.string(), "--split", "holdout", "--out",
                          (run.dir.path / "empty").string()});
  CHECK(empty.code == 3);
}

TEST_CASE("eval fails fast on unreadable samples unless told to skip them") {
  TempDir dir("sgn_cli_skip");
  const fs::path pool = dir.path / "pool";
  const double tones[] = {300, 1200, 3000};
  const char *names[] = {"a", "b", "c"};
  for (int c = 0; c < 3; ++c) {
    fs::create_directories(pool / names[c]);
    for (int i = 0; i < 10; ++i) {
      WriteTone(pool / names[c] / ("f" + std::to_string(i) + ".wav"), tones[c] * (1 + 0.01 * i), 4096);
    }
  }
  const fs::path data = dir.path / "data";
  REQUIRE(Cli({"gendata", "--wav-root", pool.string(), "--frames", "16", "--out", data.string()}).code == 0);
  // f9.wav of class a is its only test file.
  std::ofstream(pool / "a" / "f9.wav", std::ios::binary) << "RIFF-broken";

  const std::vector<std::string> base{"eval", "--baseline", "--manifest", (data / "manifest.tsv").string(),
                                      "--pair-count", "12", "--seed", "1"};
  auto with = [&](std::vector<std::string> extra, const std::string &out) {
    auto args = base;
    args.insert(args.end(), extra.begin(), extra.end());
    args.push_back("--out");
    args.push_back((dir.path / out).string());
    return Cli(args);
  };
  CHECK(with({}, "strict").code == 1);
  const auto skipped = with({"--skip-bad"}, "lenient");
  REQUIRE_MESSAGE(skipped.code == 0, skipped.err);
  CHECK(skipped.out.find("skipped 0") == std::string::npos);
  CHECK(skipped.out.find("samples 0") == std::string::npos);
}

TEST_CASE("export-embeddings writes one row per present class") {
  TinyRun run("sgn_cli_export", 48, 12);
  REQUIRE(run.Train("m", {"--epochs", "10"}).code == 0);
  const std::string ckpt = (run.dir.path / "m" / "model.ckpt").string();
  auto export_split = [&](const std::string &split, const std::string &out) {
    const auto r = Cli({"export-embeddings", "--checkpoint", ckpt, "--manifest", run.manifest.string(), "--split",
                        split, "--out", (run.dir.path / out).string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    return run.dir.path / out / "embeddings.csv";
  };
  const fs::path test_csv = export_split("test", "test");
  const auto rows = ReadCsv(test_csv);
  REQUIRE(rows.size() == 1 + 12 * 2);
  CHECK(rows[0].size() == 2 + 8);
  const auto manifest = data::ReadManifest(run.manifest);
  const auto entries = manifest.Split("test");
  std::size_t row = 1;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto ids = entries[i]->class_ids;
    std::sort(ids.begin(), ids.end());
    for (std::size_t id : ids) {
      CHECK(rows[row][0] == std::to_string(i));
      CHECK(rows[row][1] == std::to_string(id));
      ++row;
    }
  }
  CHECK(Slurp(export_split("test", "again")) == Slurp(test_csv));

  // Nearest class centroid, fitted on training embeddings, scored on test.
  const auto train_rows = ReadCsv(export_split("train", "train"));
  std::map<std::size_t, std::vector<double>> sums;
  std::map<std::size_t, double> counts;
  for (std::size_t i = 1; i < train_rows.size(); ++i) {
    const std::size_t c = std::stoul(train_rows[i][1]);
    auto &s = sums[c];
    s.resize(8, 0.0);
    for (std::size_t d = 0; d < 8; ++d) s[d] += std::stod(train_rows[i][2 + d]);
    counts[c] += 1;
  }
  REQUIRE(sums.size() == 3);
  std::size_t correct = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    std::size_t best = 0;
    double best_dist = INFINITY;
    for (const auto &[c, s] : sums) {
      double dist = 0;
      for (std::size_t d = 0; d < 8; ++d) {
        const double diff = std::stod(rows[i][2 + d]) - s[d] / counts[c];
        dist += diff * diff;
      }
      if (dist < best_dist) {
        best_dist = dist;
        best = c;
      }
    }
    correct += best == std::stoul(rows[i][1]);
  }
  const double accuracy = double(correct) / double(rows.size() - 1);
  MESSAGE("nearest-centroid accuracy " << accuracy);
  CHECK(accuracy >= 0.9);
}
