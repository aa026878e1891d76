// Copyright 2026 The SGN Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sgn/model/sgn.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "sgn/autodiff/ops.h"
#include "sgn/common/error.h"

namespace sgn::model {

using namespace sgn::ad;

namespace {

constexpr double kGroupingEps = 1e-6;
constexpr double kTokenInitStd = 0.02;

void CheckClassIds(std::span<const std::size_t> ids, std::size_t classes) {
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= classes) {
      throw DomainError("class id " + std::to_string(ids[i]) + " out of range for " +
                        std::to_string(classes) + " classes");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (ids[j] == ids[i]) throw DomainError("duplicate class id " + std::to_string(ids[i]));
    }
  }
}

}  // namespace

dsp::Grid MaskSet::MaskGrid(std::size_t i) const {
  if (i >= count()) throw DimensionError("mask index out of range");
  dsp::Grid g(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(i * rows * cols), rows * cols, g.data());
  return g;
}

Tensor PrepareInput(const dsp::Grid &warped) {
  if (warped.rows() != warped.cols()) {
    throw DimensionError("network input must be square, got [" + std::to_string(warped.rows()) +
                         "x" + std::to_string(warped.cols()) + "]");
  }
  std::vector<double> v(static_cast<std::size_t>(warped.size()));
  for (Eigen::Index i = 0; i < warped.size(); ++i) v[i] = std::log1p(warped.data()[i]);
  const auto n = static_cast<std::size_t>(warped.rows());
  return Tensor::FromData({1, n, n}, std::move(v));
}

SemanticGroupingNet::Linear SemanticGroupingNet::MakeLinear(const std::string &name, std::size_t in,
                                                            std::size_t out, bool bias,
                                                            std::mt19937_64 &rng) {
  Linear l;
  l.w = params_.Add(name + ".w", UniformFanIn({in, out}, in, rng));
  if (bias) l.b = params_.Add(name + ".b", Tensor::Zeros({out}));
  return l;
}

SemanticGroupingNet::ConvBlock SemanticGroupingNet::MakeConv(const std::string &name, std::size_t in,
                                                             std::size_t out, std::size_t k,
                                                             bool norm, std::mt19937_64 &rng) {
  ConvBlock c;
  c.kernel = params_.Add(name + ".kernel", UniformFanIn({out, in, k, k}, in * k * k, rng));
  if (norm) {
    // The normalization removes any conv bias, so the affine shift stands in.
    c.gain = params_.Add(name + ".gain", Tensor::Full({out}, 1.0));
    c.shift = params_.Add(name + ".shift", Tensor::Zeros({out}));
  } else {
    c.bias = params_.Add(name + ".bias", Tensor::Zeros({out}));
  }
  return c;
}

SemanticGroupingNet::SemanticGroupingNet(const SgnConfig &config, std::uint64_t seed)
    : config_(config) {
  config_.Validate();
  std::mt19937_64 rng(seed);
  const std::size_t d = config_.dim, c = config_.classes, p = config_.patch;

  patch_kernel_ = params_.Add("patch.kernel", UniformFanIn({d, 1, p, p}, p * p, rng));
  patch_bias_ = params_.Add("patch.bias", Tensor::Zeros({d}));
  positional_ = params_.Add("patch.positional", Gaussian({config_.patches(), d}, kTokenInitStd, rng));
  tokens_ = params_.Add("tokens", Gaussian({c, d}, kTokenInitStd, rng));

  for (std::size_t i = 0; i < config_.depth; ++i) {
    const std::string n = "block" + std::to_string(i);
    Block b;
    b.ln1_gain = params_.Add(n + ".ln1.gain", Tensor::Full({d}, 1.0));
    b.ln1_bias = params_.Add(n + ".ln1.bias", Tensor::Zeros({d}));
    b.q = MakeLinear(n + ".attn.q", d, d, true, rng);
    b.k = MakeLinear(n + ".attn.k", d, d, true, rng);
    b.v = MakeLinear(n + ".attn.v", d, d, true, rng);
    b.o = MakeLinear(n + ".attn.o", d, d, true, rng);
    b.ln2_gain = params_.Add(n + ".ln2.gain", Tensor::Full({d}, 1.0));
    b.ln2_bias = params_.Add(n + ".ln2.bias", Tensor::Zeros({d}));
    b.fc1 = MakeLinear(n + ".mlp.fc1", d, config_.mlp_ratio * d, true, rng);
    b.fc2 = MakeLinear(n + ".mlp.fc2", config_.mlp_ratio * d, d, true, rng);
    blocks_.push_back(std::move(b));
  }

  token_fc_ = MakeLinear("token_fc", d, c, true, rng);
  wq_ = MakeLinear("group.q", d, d, false, rng);
  wk_ = MakeLinear("group.k", d, d, false, rng);
  wv_ = MakeLinear("group.v", d, d, false, rng);
  wo_ = MakeLinear("group.o", d, d, false, rng);
  presence_fc_ = MakeLinear("presence_fc", d, 1, true, rng);

  const std::size_t levels = config_.unet_depth;
  for (std::size_t k = 0; k < levels; ++k) {
    const std::size_t in = k == 0 ? 1 : config_.UnetChannels(k - 1);
    down_.push_back(MakeConv("unet.down" + std::to_string(k), in, config_.UnetChannels(k), 4, true, rng));
  }
  // up_[j] produces level j - 1 resolution (full resolution for j == 0).
  up_.resize(levels);
  for (std::size_t j = levels; j-- > 0;) {
    const std::size_t in = j == levels - 1 ? config_.UnetChannels(j) : 2 * config_.UnetChannels(j);
    const std::size_t out = j == 0 ? config_.UnetChannels(0) : config_.UnetChannels(j - 1);
    up_[j] = MakeConv("unet.up" + std::to_string(j), in, out, 3, true, rng);
  }
  head_ = MakeConv("unet.head", config_.UnetChannels(0), d, 3, false, rng);
  mask_bias_ = params_.Add("mask.bias", Tensor::Zeros({1}));
}

std::vector<Parameter *> SemanticGroupingNet::Trainable() {
  std::vector<Parameter *> out;
  for (Parameter &p : params_.all()) {
    const bool sct_only = p.name == "tokens" || p.name.starts_with("token_fc.");
    const bool cag_only = p.name.starts_with("group.");
    if (!config_.use_sct && sct_only) continue;
    if (!config_.use_cag && cag_only) continue;
    out.push_back(&p);
  }
  return out;
}

Tensor SemanticGroupingNet::Apply(const Linear &l, const Tensor &x) {
  Tensor y = MatMul(x, l.w);
  return l.b.defined() ? AddRowVector(y, l.b) : y;
}

Tensor SemanticGroupingNet::PatchEmbed(const Tensor &input, bool add_positional) const {
  const std::size_t g = config_.grid;
  if (input.shape() != Shape{1, g, g}) {
    throw DimensionError("patch_embed expects [1x" + std::to_string(g) + "x" + std::to_string(g) +
                         "], got " + ShapeString(input.shape()));
  }
  Tensor conv = Conv2d(input, patch_kernel_, patch_bias_, config_.patch, 0);
  Tensor f = Transpose(Reshape(conv, {config_.dim, config_.patches()}));
  return add_positional ? Add(f, positional_) : f;
}

Tensor SemanticGroupingNet::Attention(const Block &b, const Tensor &x) const {
  const std::size_t heads = config_.heads, dh = config_.dim / heads;
  const Tensor q = Apply(b.q, x), k = Apply(b.k, x), v = Apply(b.v, x);
  std::vector<Tensor> outs;
  outs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const Tensor qh = SliceCols(q, h * dh, dh);
    const Tensor kh = SliceCols(k, h * dh, dh);
    const Tensor vh = SliceCols(v, h * dh, dh);
    const Tensor scores = Scale(MatMul(qh, Transpose(kh)), 1.0 / std::sqrt(double(dh)));
    outs.push_back(MatMul(Softmax(scores, 1), vh));
  }
  return Apply(b.o, heads == 1 ? outs[0] : ConcatCols(outs));
}

std::pair<Tensor, Tensor> SemanticGroupingNet::Encode(const Tensor &features,
                                                      const Tensor &tokens) const {
  const std::size_t p = features.dim(0), c = tokens.dim(0);
  Tensor x = ConcatRows({features, tokens});
  for (const Block &b : blocks_) {
    x = Add(x, Attention(b, LayerNorm(x, b.ln1_gain, b.ln1_bias)));
    const Tensor h = Gelu(Apply(b.fc1, LayerNorm(x, b.ln2_gain, b.ln2_bias)));
    x = Add(x, Apply(b.fc2, h));
  }
  return {SliceRows(x, 0, p), SliceRows(x, p, c)};
}

Tensor SemanticGroupingNet::TokenLogits(const Tensor &tokens) const {
  return Apply(token_fc_, tokens);
}

Grouping SemanticGroupingNet::Group(const Tensor &features, const Tensor &tokens,
                                    std::mt19937_64 *rng) const {
  const std::size_t p = features.dim(0), c = tokens.dim(0);
  if (!config_.use_cag) {
    return {tokens, Tensor::Full({p, c}, 1.0 / double(c))};
  }
  const Tensor logits = Scale(MatMul(Apply(wq_, features), Transpose(Apply(wk_, tokens))),
                              1.0 / std::sqrt(double(config_.dim)));
  Tensor a;
  if (config_.grouping == GroupingMode::kSoftmax) {
    a = Softmax(logits, 1);
  } else if (rng != nullptr) {
    a = GumbelSoftmaxHard(logits, config_.gumbel_temperature, *rng);
  } else {
    if (GradEnabled() && logits.requires_grad()) {
      throw Error("hard grouping needs an rng when gradients are recorded");
    }
    std::vector<double> onehot(p * c, 0.0);
    for (std::size_t i = 0; i < p; ++i) {
      const auto row = logits.data().subspan(i * c, c);
      onehot[i * c + (std::max_element(row.begin(), row.end()) - row.begin())] = 1.0;
    }
    a = Tensor::FromData({p, c}, std::move(onehot));
  }
  // Hard column sums are patch counts, so a floor of one leaves every
  // non-empty column exact and keeps the straight-through gradient of an
  // empty column bounded.
  const double floor = config_.grouping == GroupingMode::kSoftmax ? kGroupingEps : 1.0;
  const Tensor pooled = MatMul(Transpose(NormalizeColumns(a, floor)), Apply(wv_, features));
  return {Add(tokens, Apply(wo_, pooled)), a};
}

Tensor SemanticGroupingNet::PresenceLogits(const Tensor &g) const {
  return Reshape(Apply(presence_fc_, g), {g.dim(0)});
}

Tensor SemanticGroupingNet::NormAffine(const ConvBlock &c, const Tensor &x) {
  // Per-sample instance normalization, then the learned per-channel affine.
  const std::size_t ch = x.dim(0), plane = x.dim(1) * x.dim(2);
  const Tensor ones = Tensor::Full({plane}, 1.0), zeros = Tensor::Zeros({plane});
  const Tensor normed = LayerNorm(Reshape(x, {ch, plane}), ones, zeros);
  return ChannelAffine(Reshape(normed, x.shape()), c.gain, c.shift);
}

Tensor SemanticGroupingNet::UnetFeatures(const Tensor &input) const {
  const std::size_t g = config_.grid;
  if (input.shape() != Shape{1, g, g}) {
    throw DimensionError("unet expects [1x" + std::to_string(g) + "x" + std::to_string(g) +
                         "], got " + ShapeString(input.shape()));
  }
  std::vector<Tensor> skips;
  Tensor x = input;
  for (const ConvBlock &c : down_) {
    x = LeakyRelu(NormAffine(c, Conv2d(x, c.kernel, Tensor(), 2, 1)), 0.2);
    skips.push_back(x);
  }
  for (std::size_t j = up_.size(); j-- > 0;) {
    x = Relu(NormAffine(up_[j], Upsample2xConv(x, up_[j].kernel, Tensor())));
    if (j > 0) x = ConcatRows({x, skips[j - 1]});
  }
  x = Conv2d(x, head_.kernel, head_.bias, 1, 1);
  return Reshape(x, {config_.dim, g * g});
}

Tensor SemanticGroupingNet::MaskLogits(const Tensor &unet, const Tensor &selected) const {
  return Add(MatMul(selected, unet), mask_bias_);
}

ForwardResult SemanticGroupingNet::Forward(const Tensor &input, std::span<const std::size_t> class_ids,
                                           std::mt19937_64 *rng) const {
  CheckClassIds(class_ids, config_.classes);
  ForwardResult r;
  r.class_ids.assign(class_ids.begin(), class_ids.end());
  std::tie(r.patch_features, r.tokens) = Encode(PatchEmbed(input), tokens_);
  r.token_logits = TokenLogits(r.tokens);
  r.grouping = Group(r.patch_features, r.tokens, rng);
  r.presence_logits = PresenceLogits(r.grouping.g);
  if (!class_ids.empty()) {
    r.mask_logits = MaskLogits(UnetFeatures(input), SelectSourceEmbeddings(r.grouping.g, class_ids));
  }
  return r;
}

Tensor SelectSourceEmbeddings(const Tensor &g, std::span<const std::size_t> class_ids) {
  if (g.rank() != 2) throw DimensionError("grouped embeddings must be 2-D");
  if (class_ids.empty()) throw DomainError("at least one class id is required");
  CheckClassIds(class_ids, g.dim(0));
  return GatherRows(g, class_ids);
}

MaskSet PredictedMasks(const Tensor &mask_logits, std::span<const std::size_t> class_ids,
                       std::size_t grid) {
  if (mask_logits.shape() != Shape{class_ids.size(), grid * grid}) {
    throw DimensionError("mask logits " + ShapeString(mask_logits.shape()) +
                         " do not match " + std::to_string(class_ids.size()) + " masks of " +
                         std::to_string(grid) + "x" + std::to_string(grid));
  }
  MaskSet m;
  m.kind = MaskSet::Kind::kSigmoidPrediction;
  m.class_ids.assign(class_ids.begin(), class_ids.end());
  m.rows = m.cols = grid;
  NoGradGuard no_grad;
  const Tensor s = Sigmoid(mask_logits);
  m.values.assign(s.data().begin(), s.data().end());
  return m;
}

ClassSelection InferClassIds(std::span<const double> presence, SelectionMode mode, std::size_t k,
                             double theta) {
  if (presence.empty()) throw DomainError("presence vector is empty");
  std::vector<std::size_t> order(presence.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return presence[a] > presence[b]; });
  ClassSelection out;
  if (mode == SelectionMode::kTopK) {
    if (k == 0 || k > presence.size()) {
      throw DomainError("top-k needs 1 <= k <= " + std::to_string(presence.size()));
    }
    out.class_ids.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  } else {
    for (std::size_t i = 0; i < presence.size(); ++i)
      if (presence[i] > theta) out.class_ids.push_back(i);
    if (out.class_ids.empty()) {
      out.class_ids.push_back(order[0]);
      out.fallback = true;
    }
  }
  std::sort(out.class_ids.begin(), out.class_ids.end());
  return out;
}

}  // namespace sgn::model
