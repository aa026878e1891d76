// Copyright 2026 The SGN Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "sgn/autodiff/optim.h"
#include "sgn/autodiff/tensor.h"
#include "sgn/dsp/audio.h"
#include "sgn/model/config.h"

namespace sgn::model {

using ad::Tensor;

struct MaskSet {
  enum class Kind { kBinaryTarget, kSigmoidPrediction };
  Kind kind = Kind::kSigmoidPrediction;
  std::vector<std::size_t> class_ids;
  std::size_t rows = 0;  // log-frequency bins
  std::size_t cols = 0;  // frames
  std::vector<double> values;  // [N x rows x cols]

  std::size_t count() const { return class_ids.size(); }
  std::span<const double> mask(std::size_t i) const {
    return std::span<const double>(values).subspan(i * rows * cols, rows * cols);
  }
  dsp::Grid MaskGrid(std::size_t i) const;
};

struct Grouping {
  Tensor g;           // [C x D]
  Tensor assignment;  // [P x C]
};

struct ForwardResult {
  Tensor patch_features;  // f-hat, [P x D]
  Tensor tokens;          // c-hat, [C x D]
  Tensor token_logits;    // [C x C]; softmax rows are e_i
  Grouping grouping;
  Tensor presence_logits; // [C]; sigmoid gives p_i
  Tensor mask_logits;     // [N x HW]; sigmoid gives the masks
  std::vector<std::size_t> class_ids;
};

// log(1 + warped magnitude) as a [1 x grid x grid] network input.
Tensor PrepareInput(const dsp::Grid &warped);

class SemanticGroupingNet {
 public:
  SemanticGroupingNet(const SgnConfig &config, std::uint64_t seed);

  const SgnConfig &config() const { return config_; }
  ad::ParameterSet &parameters() { return params_; }
  const ad::ParameterSet &parameters() const { return params_; }
  // Parameters that receive gradients under the current ablation flags.
  // Frozen class tokens (use_sct off) and unused heads are left out.
  std::vector<ad::Parameter *> Trainable();

  // [1 x grid x grid] -> [P x D]. Patches are ordered row-major over
  // (frequency block, time block).
  Tensor PatchEmbed(const Tensor &input, bool add_positional = true) const;
  // Runs the transformer over [features; tokens] and splits the result.
  std::pair<Tensor, Tensor> Encode(const Tensor &features, const Tensor &tokens) const;
  Tensor ClassTokens() const { return tokens_; }
  Tensor TokenLogits(const Tensor &tokens) const;
  // `rng` drives the Gumbel noise in hard mode; without it the hard
  // assignment is the noise-free argmax (inference only).
  Grouping Group(const Tensor &features, const Tensor &tokens, std::mt19937_64 *rng) const;
  Tensor PresenceLogits(const Tensor &g) const;
  // [1 x grid x grid] -> [D x HW], the transpose of the per-bin feature
  // matrix so that mask logits come out as [N x HW].
  Tensor UnetFeatures(const Tensor &input) const;
  Tensor MaskLogits(const Tensor &unet, const Tensor &selected) const;

  ForwardResult Forward(const Tensor &input, std::span<const std::size_t> class_ids,
                        std::mt19937_64 *rng = nullptr) const;

 private:
  struct Linear {
    Tensor w, b;  // [in x out], [out] (b may be undefined)
  };
  struct Block {
    Tensor ln1_gain, ln1_bias, ln2_gain, ln2_bias;
    Linear q, k, v, o, fc1, fc2;
  };
  struct ConvBlock {
    Tensor kernel, bias, gain, shift;
  };

  Linear MakeLinear(const std::string &name, std::size_t in, std::size_t out, bool bias,
                    std::mt19937_64 &rng);
  ConvBlock MakeConv(const std::string &name, std::size_t in, std::size_t out, std::size_t k,
                     bool norm, std::mt19937_64 &rng);
  static Tensor Apply(const Linear &l, const Tensor &x);
  Tensor Attention(const Block &b, const Tensor &x) const;
  static Tensor NormAffine(const ConvBlock &c, const Tensor &x);

  SgnConfig config_;
  ad::ParameterSet params_;
  Tensor patch_kernel_, patch_bias_, positional_, tokens_;
  std::vector<Block> blocks_;
  Linear token_fc_, wq_, wk_, wv_, wo_, presence_fc_;
  std::vector<ConvBlock> down_, up_;
  ConvBlock head_;
  Tensor mask_bias_;
};

Tensor SelectSourceEmbeddings(const Tensor &g, std::span<const std::size_t> class_ids);

// Converts mask logits [N x HW] to a MaskSet of sigmoid scores.
MaskSet PredictedMasks(const Tensor &mask_logits, std::span<const std::size_t> class_ids,
                       std::size_t grid);

struct ClassSelection {
  std::vector<std::size_t> class_ids;
  bool fallback = false;  // threshold mode found nothing and fell back to top-1
};

enum class SelectionMode { kThreshold, kTopK };

// Threshold: {i : p_i > theta}. Top-k: the k largest, ties to the lower
// index. Results are sorted by class id.
ClassSelection InferClassIds(std::span<const double> presence, SelectionMode mode,
                             std::size_t k = 1, double theta = 0.5);

}  // namespace sgn::model
