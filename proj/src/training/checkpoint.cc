// Copyright 2026 The SGN Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sgn/training/checkpoint.h"

#include <bit>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <vector>

#include "sgn/common/error.h"

namespace sgn::train {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[4] = {'S', 'G', 'N', '1'};

class Writer {
 public:
  void Bytes(const void *p, std::size_t n) {
    const auto *c = static_cast<const char *>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  template <typename T>
  void Uint(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void Double(double d) { Uint(std::bit_cast<std::uint64_t>(d)); }
  void String(const std::string &s) {
    Uint<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    Bytes(s.data(), s.size());
  }
  const std::vector<char> &buffer() const { return buf_; }

 private:
  std::vector<char> buf_;
};

class Reader {
 public:
  Reader(std::vector<char> data, std::string path) : data_(std::move(data)), path_(std::move(path)) {}

  void Need(std::size_t n, const char *what) const {
    if (data_.size() - pos_ < n) {
      throw FormatError(path_ + ": truncated checkpoint while reading " + what, data_.size());
    }
  }
  template <typename T>
  T Uint(const char *what) {
    Need(sizeof(T), what);
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<T>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return v;
  }
  double Double(const char *what) { return std::bit_cast<double>(Uint<std::uint64_t>(what)); }
  std::string String(std::size_t n, const char *what) {
    Need(n, what);
    std::string s(data_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == data_.size(); }
  const std::string &path() const { return path_; }

 private:
  std::vector<char> data_;
  std::string path_;
  std::size_t pos_ = 0;
};

struct Record {
  ad::Shape shape;
  std::vector<double> values;
};

void WriteRecord(Writer &w, const std::string &name, const ad::Shape &shape, std::span<const double> v) {
  w.String(name);
  w.Uint<std::uint32_t>(static_cast<std::uint32_t>(shape.size()));
  for (auto d : shape) w.Uint<std::uint64_t>(d);
  for (double x : v) w.Double(x);
}

struct Contents {
  model::SgnConfig config;
  std::vector<std::pair<std::string, Record>> records;
};

Reader OpenFile(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint '" + path.string() + "'");
  std::vector<char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return Reader(std::move(data), path.string());
}

model::SgnConfig ReadHeader(Reader &r) {
  const std::string magic = r.String(4, "magic");
  if (magic != std::string(kMagic, 4)) {
    throw IncompatibleError(r.path() + ": not an SGN checkpoint (bad magic)");
  }
  const auto version = r.Uint<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw IncompatibleError(r.path() + ": checkpoint format version " + std::to_string(version) +
                            " is not supported (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  const auto header_len = r.Uint<std::uint64_t>("header length");
  const std::size_t at = r.pos();
  const std::string header = r.String(header_len, "config header");
  try {
    return model::SgnConfig::FromText(header);
  } catch (const DomainError &e) {
    throw FormatError(r.path() + ": bad config header: " + e.what(), at);
  }
}

Contents ReadAll(const fs::path &path) {
  Reader r = OpenFile(path);
  Contents c;
  c.config = ReadHeader(r);
  const auto count = r.Uint<std::uint32_t>("record count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::size_t at = r.pos();
    const auto name_len = r.Uint<std::uint32_t>("record name length");
    std::string name = r.String(name_len, "record name");
    const auto rank = r.Uint<std::uint32_t>("record rank");
    if (rank > 8) throw FormatError(r.path() + ": implausible rank for '" + name + "'", at);
    Record rec;
    std::size_t n = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      rec.shape.push_back(r.Uint<std::uint64_t>("record dims"));
      n *= rec.shape.back();
    }
    r.Need(n * 8, "record values");
    rec.values.resize(n);
    for (auto &v : rec.values) v = r.Double("record values");
    c.records.emplace_back(std::move(name), std::move(rec));
  }
  if (!r.done()) throw FormatError(r.path() + ": trailing bytes after the last record", r.pos());
  return c;
}

}  // namespace

void SaveCheckpoint(const model::SemanticGroupingNet &net, const fs::path &path) {
  Writer w;
  w.Bytes(kMagic, 4);
  w.Uint<std::uint32_t>(kCheckpointVersion);
  const std::string header = net.config().ToText();
  w.Uint<std::uint64_t>(header.size());
  w.Bytes(header.data(), header.size());
  const auto params = net.parameters().all();
  w.Uint<std::uint32_t>(static_cast<std::uint32_t>(2 * params.size()));
  for (const auto &p : params) {
    WriteRecord(w, p.name, p.value.shape(), p.value.data());
    std::vector<double> m = p.momentum;
    m.resize(p.value.numel(), 0.0);
    WriteRecord(w, p.name + ".m", p.value.shape(), m);
  }
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write checkpoint '" + path.string() + "'");
    out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
    if (!out) throw Error("write failed for '" + path.string() + "'");
  }
  fs::rename(tmp, path);
}

void LoadCheckpointInto(model::SemanticGroupingNet &net, const fs::path &path) {
  Contents c = ReadAll(path);
  std::map<std::string, const Record *> by_name;
  for (const auto &[name, rec] : c.records) by_name[name] = &rec;
  // Validate everything before touching the network.
  for (const auto &p : net.parameters().all()) {
    for (const std::string &name : {p.name, p.name + ".m"}) {
      const auto it = by_name.find(name);
      if (it == by_name.end()) {
        throw IncompatibleError(path.string() + ": tensor '" + name + "' is missing from the checkpoint");
      }
      if (it->second->shape != p.value.shape()) {
        throw IncompatibleError(path.string() + ": tensor '" + name + "' has shape " +
                                ad::ShapeString(it->second->shape) + " in the checkpoint but " +
                                ad::ShapeString(p.value.shape()) + " in the model");
      }
    }
  }
  if (c.records.size() != 2 * net.parameters().size()) {
    for (const auto &[name, rec] : c.records) {
      const std::string base = name.ends_with(".m") ? name.substr(0, name.size() - 2) : name;
      if (!net.parameters().Contains(base)) {
        throw IncompatibleError(path.string() + ": checkpoint tensor '" + name + "' has no counterpart in the model");
      }
    }
  }
  for (auto &p : net.parameters().all()) {
    const Record &v = *by_name.at(p.name);
    std::copy(v.values.begin(), v.values.end(), p.value.mutable_data().begin());
    p.momentum = by_name.at(p.name + ".m")->values;
  }
}

std::unique_ptr<model::SemanticGroupingNet> LoadCheckpoint(const fs::path &path) {
  auto net = std::make_unique<model::SemanticGroupingNet>(ReadCheckpointConfig(path), 0);
  LoadCheckpointInto(*net, path);
  return net;
}

model::SgnConfig ReadCheckpointConfig(const fs::path &path) {
  Reader r = OpenFile(path);
  return ReadHeader(r);
}

}  // namespace sgn::train
