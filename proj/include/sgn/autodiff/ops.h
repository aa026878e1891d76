// Copyright 2026 The SGN Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Differentiable primitives. Binary elementwise ops accept exactly matching
// shapes or a single-element operand; any other combination is a
// DimensionError. Tensors are row-major; images are [channels x H x W].

#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "sgn/autodiff/tensor.h"

namespace sgn::ad {

// ---- linear algebra ----
Tensor MatMul(const Tensor &a, const Tensor &b);  // [m x k] * [k x n]
Tensor Transpose(const Tensor &a);                // 2-D only

// ---- elementwise ----
Tensor Add(const Tensor &a, const Tensor &b);
Tensor Sub(const Tensor &a, const Tensor &b);
Tensor Mul(const Tensor &a, const Tensor &b);
Tensor Scale(const Tensor &x, double factor);
Tensor AddScalar(const Tensor &x, double offset);

Tensor Sigmoid(const Tensor &x);
Tensor Relu(const Tensor &x);
Tensor LeakyRelu(const Tensor &x, double slope);
// Exact (erf) form.
Tensor Gelu(const Tensor &x);
// Throws DomainError for x <= -1.
Tensor Log1p(const Tensor &x);
Tensor Exp(const Tensor &x);
// Throws DomainError for x == 0.
Tensor Reciprocal(const Tensor &x);

// ---- reductions ----
Tensor Sum(const Tensor &x);
Tensor Mean(const Tensor &x);
// Sums a [R x C] tensor over rows, giving [C].
Tensor ColumnSum(const Tensor &x);

// ---- shape manipulation ----
Tensor Reshape(const Tensor &x, Shape shape);
// Slices / concatenates along axis 0 (any rank, trailing dims must agree).
Tensor SliceRows(const Tensor &x, std::size_t begin, std::size_t count);
Tensor ConcatRows(const std::vector<Tensor> &parts);
Tensor GatherRows(const Tensor &x, std::span<const std::size_t> rows);
// Column slices / concatenation of 2-D tensors.
Tensor SliceCols(const Tensor &x, std::size_t begin, std::size_t count);
Tensor ConcatCols(const std::vector<Tensor> &parts);

// ---- row / channel broadcasting made explicit ----
Tensor AddRowVector(const Tensor &x, const Tensor &row);    // [R x C] + [C]
Tensor ScaleRows(const Tensor &x, const Tensor &factors);   // [R x C] * [R]
// Divides each column of a 2-D tensor by max(column sum, floor).
Tensor NormalizeColumns(const Tensor &x, double floor);
Tensor ChannelAffine(const Tensor &x, const Tensor &gain,   // [C x H x W]
                     const Tensor &bias);

// ---- network layers ----
// Numerically stable softmax along `axis`.
Tensor Softmax(const Tensor &x, std::size_t axis);
// Normalizes over the last axis, then applies gain and bias of that size.
Tensor LayerNorm(const Tensor &x, const Tensor &gain, const Tensor &bias,
                 double eps = 1e-5);
// Cross-correlation. input [C_in x H x W], kernel [C_out x C_in x kh x kw],
// bias [C_out] or undefined.
Tensor Conv2d(const Tensor &input, const Tensor &kernel, const Tensor &bias,
              std::size_t stride, std::size_t padding);
// Nearest-neighbour 2x spatial upsampling of [C x H x W].
Tensor Upsample2x(const Tensor &input);
// Upsample2x followed by a 3x3, stride-1, padding-1 convolution.
Tensor Upsample2xConv(const Tensor &input, const Tensor &kernel,
                      const Tensor &bias);
// Straight-through Gumbel-Softmax over the last axis of a 2-D tensor: the
// forward value is the one-hot argmax of (logits + g) / tau, the backward
// pass uses the gradient of softmax((logits + g) / tau).
Tensor GumbelSoftmaxHard(const Tensor &logits, double tau,
                         std::mt19937_64 &rng);

// ---- losses (all return shape [1]) ----
// Mean binary cross-entropy between sigmoid(logits) and targets in [0, 1].
Tensor BceWithLogits(const Tensor &logits, std::span<const double> targets);
// Sum over rows of -log softmax(logits[r])[targets[r]] for [R x C] logits.
Tensor CrossEntropy(const Tensor &logits, std::span<const std::size_t> targets);
// Single-vector cross-entropy for logits of shape [C].
Tensor CeLoss(const Tensor &logits, std::size_t target_index);

}  // namespace sgn::ad
