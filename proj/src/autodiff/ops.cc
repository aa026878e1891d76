// Copyright 2026 The SGN Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sgn/autodiff/ops.h"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <string>

#include "sgn/common/error.h"

namespace sgn::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

Node &Input(Node &self, std::size_t i) { return *self.inputs[i]; }

void RequireRank(const Tensor &t, std::size_t rank, const char *op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " +
                         std::to_string(rank) + ", got shape " +
                         ShapeString(t.shape()));
  }
}

double StableSigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

enum class BinaryKind { kAdd, kSub, kMul };

Tensor Binary(const Tensor &a, const Tensor &b, BinaryKind kind,
              const char *name) {
  const bool same = a.shape() == b.shape();
  const bool a_scalar = a.numel() == 1 && !same;
  const bool b_scalar = b.numel() == 1 && !same;
  if (!same && !a_scalar && !b_scalar) {
    throw DimensionError(std::string(name) + ": shapes " +
                         ShapeString(a.shape()) + " and " +
                         ShapeString(b.shape()) + " are not compatible");
  }
  const Shape out_shape = a_scalar ? b.shape() : a.shape();
  const std::size_t n = NumElements(out_shape);
  auto av = a.data();
  auto bv = b.data();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = av[a_scalar ? 0 : i];
    const double y = bv[b_scalar ? 0 : i];
    switch (kind) {
      case BinaryKind::kAdd: out[i] = x + y; break;
      case BinaryKind::kSub: out[i] = x - y; break;
      case BinaryKind::kMul: out[i] = x * y; break;
    }
  }
  return MakeOp(out_shape, std::move(out), name, {a, b},
                [kind, a_scalar, b_scalar](Node &self) {
                  Node &na = Input(self, 0);
                  Node &nb = Input(self, 1);
                  const auto &g = self.grad;
                  const std::size_t n = g.size();
                  if (na.requires_grad) {
                    auto &ga = na.GradBuffer();
                    for (std::size_t i = 0; i < n; ++i) {
                      double d = g[i];
                      if (kind == BinaryKind::kMul) d *= nb.value[b_scalar ? 0 : i];
                      ga[a_scalar ? 0 : i] += d;
                    }
                  }
                  if (nb.requires_grad) {
                    auto &gb = nb.GradBuffer();
                    for (std::size_t i = 0; i < n; ++i) {
                      double d = g[i];
                      if (kind == BinaryKind::kSub) d = -d;
                      if (kind == BinaryKind::kMul) d *= na.value[a_scalar ? 0 : i];
                      gb[b_scalar ? 0 : i] += d;
                    }
                  }
                });
}

// Unary op whose derivative is a function of (input, output).
template <typename Fwd, typename Deriv>
Tensor Unary(const Tensor &x, const char *name, Fwd fwd, Deriv deriv) {
  auto xv = x.data();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = fwd(xv[i]);
  return MakeOp(x.shape(), std::move(out), name, {x}, [deriv](Node &self) {
    Node &nx = Input(self, 0);
    auto &gx = nx.GradBuffer();
    for (std::size_t i = 0; i < gx.size(); ++i) {
      gx[i] += self.grad[i] * deriv(nx.value[i], self.value[i]);
    }
  });
}

}  // namespace

// ---------------------------------------------------------------- matmul

Tensor MatMul(const Tensor &a, const Tensor &b) {
  RequireRank(a, 2, "matmul");
  RequireRank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions differ, " +
                         ShapeString(a.shape()) + " x " +
                         ShapeString(b.shape()));
  }
  std::vector<double> out(m * n);
  MapMat(out.data(), m, n).noalias() =
      ConstMapMat(a.data().data(), m, k) * ConstMapMat(b.data().data(), k, n);
  return MakeOp({m, n}, std::move(out), "matmul", {a, b},
                [m, k, n](Node &self) {
                  Node &na = Input(self, 0);
                  Node &nb = Input(self, 1);
                  ConstMapMat g(self.grad.data(), m, n);
                  if (na.requires_grad) {
                    MapMat(na.GradBuffer().data(), m, k).noalias() +=
                        g * ConstMapMat(nb.value.data(), k, n).transpose();
                  }
                  if (nb.requires_grad) {
                    MapMat(nb.GradBuffer().data(), k, n).noalias() +=
                        ConstMapMat(na.value.data(), m, k).transpose() * g;
                  }
                });
}

Tensor Transpose(const Tensor &a) {
  RequireRank(a, 2, "transpose");
  const std::size_t r = a.dim(0), c = a.dim(1);
  std::vector<double> out(r * c);
  MapMat(out.data(), c, r) = ConstMapMat(a.data().data(), r, c).transpose();
  return MakeOp({c, r}, std::move(out), "transpose", {a}, [r, c](Node &self) {
    MapMat(Input(self, 0).GradBuffer().data(), r, c) +=
        ConstMapMat(self.grad.data(), c, r).transpose();
  });
}

// ----------------------------------------------------------- elementwise

Tensor Add(const Tensor &a, const Tensor &b) {
  return Binary(a, b, BinaryKind::kAdd, "add");
}
Tensor Sub(const Tensor &a, const Tensor &b) {
  return Binary(a, b, BinaryKind::kSub, "sub");
}
Tensor Mul(const Tensor &a, const Tensor &b) {
  return Binary(a, b, BinaryKind::kMul, "mul");
}

Tensor Scale(const Tensor &x, double factor) {
  return Unary(
      x, "scale", [factor](double v) { return v * factor; },
      [factor](double, double) { return factor; });
}

Tensor AddScalar(const Tensor &x, double offset) {
  return Unary(
      x, "add_scalar", [offset](double v) { return v + offset; },
      [](double, double) { return 1.0; });
}

Tensor Sigmoid(const Tensor &x) {
  return Unary(x, "sigmoid", StableSigmoid,
               [](double, double y) { return y * (1.0 - y); });
}

Tensor Relu(const Tensor &x) {
  return Unary(
      x, "relu", [](double v) { return v > 0 ? v : 0.0; },
      [](double v, double) { return v > 0 ? 1.0 : 0.0; });
}

Tensor LeakyRelu(const Tensor &x, double slope) {
  return Unary(
      x, "leaky_relu", [slope](double v) { return v > 0 ? v : slope * v; },
      [slope](double v, double) { return v > 0 ? 1.0 : slope; });
}

Tensor Gelu(const Tensor &x) {
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  return Unary(
      x, "gelu",
      [](double v) { return 0.5 * v * (1.0 + std::erf(v * kInvSqrt2)); },
      [inv_sqrt_2pi](double v, double) {
        const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
        return cdf + v * inv_sqrt_2pi * std::exp(-0.5 * v * v);
      });
}

Tensor Log1p(const Tensor &x) {
  for (double v : x.data()) {
    if (v <= -1.0) throw DomainError("log1p: argument <= -1");
  }
  return Unary(
      x, "log1p", [](double v) { return std::log1p(v); },
      [](double v, double) { return 1.0 / (1.0 + v); });
}

Tensor Exp(const Tensor &x) {
  return Unary(
      x, "exp", [](double v) { return std::exp(v); },
      [](double, double y) { return y; });
}

Tensor Reciprocal(const Tensor &x) {
  for (double v : x.data()) {
    if (v == 0.0) throw DomainError("reciprocal: division by zero");
  }
  return Unary(
      x, "reciprocal", [](double v) { return 1.0 / v; },
      [](double, double y) { return -y * y; });
}

// ------------------------------------------------------------ reductions

Tensor Sum(const Tensor &x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  return MakeOp({1}, {s}, "sum", {x}, [](Node &self) {
    auto &g = Input(self, 0).GradBuffer();
    for (auto &v : g) v += self.grad[0];
  });
}

Tensor Mean(const Tensor &x) {
  const double n = static_cast<double>(x.numel());
  double s = 0.0;
  for (double v : x.data()) s += v;
  return MakeOp({1}, {s / n}, "mean", {x}, [n](Node &self) {
    auto &g = Input(self, 0).GradBuffer();
    for (auto &v : g) v += self.grad[0] / n;
  });
}

Tensor ColumnSum(const Tensor &x) {
  RequireRank(x, 2, "column_sum");
  const std::size_t r = x.dim(0), c = x.dim(1);
  std::vector<double> out(c, 0.0);
  auto xv = x.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j] += xv[i * c + j];
  return MakeOp({c}, std::move(out), "column_sum", {x}, [r, c](Node &self) {
    auto &g = Input(self, 0).GradBuffer();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[j];
  });
}

// ----------------------------------------------------------------- shape

Tensor Reshape(const Tensor &x, Shape shape) {
  if (NumElements(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + ShapeString(x.shape()) +
                         " as " + ShapeString(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return MakeOp(std::move(shape), std::move(out), "reshape", {x},
                [](Node &self) {
                  auto &g = Input(self, 0).GradBuffer();
                  for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                });
}

Tensor SliceRows(const Tensor &x, std::size_t begin, std::size_t count) {
  if (x.rank() == 0 || begin + count > x.dim(0)) {
    throw DimensionError("slice_rows: range [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") out of bounds for " +
                         ShapeString(x.shape()));
  }
  const std::size_t stride = x.numel() / x.dim(0);
  Shape shape = x.shape();
  shape[0] = count;
  auto xv = x.data();
  std::vector<double> out(xv.begin() + begin * stride,
                          xv.begin() + (begin + count) * stride);
  const std::size_t offset = begin * stride;
  return MakeOp(std::move(shape), std::move(out), "slice_rows", {x},
                [offset](Node &self) {
                  auto &g = Input(self, 0).GradBuffer();
                  for (std::size_t i = 0; i < self.grad.size(); ++i)
                    g[offset + i] += self.grad[i];
                });
}

Tensor ConcatRows(const std::vector<Tensor> &parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  Shape shape = parts[0].shape();
  if (shape.empty()) throw DimensionError("concat_rows: rank-0 input");
  std::size_t rows = 0;
  std::vector<double> out;
  std::vector<std::size_t> sizes;
  for (const auto &p : parts) {
    if (p.rank() != shape.size() ||
        !std::equal(shape.begin() + 1, shape.end(), p.shape().begin() + 1)) {
      throw DimensionError("concat_rows: trailing dims differ, " +
                           ShapeString(shape) + " vs " + ShapeString(p.shape()));
    }
    rows += p.dim(0);
    out.insert(out.end(), p.data().begin(), p.data().end());
    sizes.push_back(p.numel());
  }
  shape[0] = rows;
  return MakeOp(std::move(shape), std::move(out), "concat_rows", parts,
                [sizes](Node &self) {
                  std::size_t offset = 0;
                  for (std::size_t k = 0; k < sizes.size(); ++k) {
                    Node &in = Input(self, k);
                    if (in.requires_grad) {
                      auto &g = in.GradBuffer();
                      for (std::size_t i = 0; i < sizes[k]; ++i)
                        g[i] += self.grad[offset + i];
                    }
                    offset += sizes[k];
                  }
                });
}

Tensor GatherRows(const Tensor &x, std::span<const std::size_t> rows) {
  if (x.rank() == 0) throw DimensionError("gather_rows: rank-0 input");
  const std::size_t stride = x.numel() / x.dim(0);
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  for (auto r : idx) {
    if (r >= x.dim(0)) {
      throw DimensionError("gather_rows: row " + std::to_string(r) +
                           " out of range for " + ShapeString(x.shape()));
    }
  }
  Shape shape = x.shape();
  shape[0] = idx.size();
  std::vector<double> out;
  out.reserve(idx.size() * stride);
  auto xv = x.data();
  for (auto r : idx)
    out.insert(out.end(), xv.begin() + r * stride, xv.begin() + (r + 1) * stride);
  return MakeOp(std::move(shape), std::move(out), "gather_rows", {x},
                [idx, stride](Node &self) {
                  auto &g = Input(self, 0).GradBuffer();
                  for (std::size_t k = 0; k < idx.size(); ++k)
                    for (std::size_t j = 0; j < stride; ++j)
                      g[idx[k] * stride + j] += self.grad[k * stride + j];
                });
}

Tensor SliceCols(const Tensor &x, std::size_t begin, std::size_t count) {
  RequireRank(x, 2, "slice_cols");
  const std::size_t r = x.dim(0), c = x.dim(1);
  if (begin + count > c) {
    throw DimensionError("slice_cols: range out of bounds for " +
                         ShapeString(x.shape()));
  }
  std::vector<double> out(r * count);
  auto xv = x.data();
  for (std::size_t i = 0; i < r; ++i)
    std::copy_n(xv.begin() + i * c + begin, count, out.begin() + i * count);
  return MakeOp({r, count}, std::move(out), "slice_cols", {x},
                [r, c, begin, count](Node &self) {
                  auto &g = Input(self, 0).GradBuffer();
                  for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < count; ++j)
                      g[i * c + begin + j] += self.grad[i * count + j];
                });
}

Tensor ConcatCols(const std::vector<Tensor> &parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t r = parts[0].dim(0);
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto &p : parts) {
    RequireRank(p, 2, "concat_cols");
    if (p.dim(0) != r) {
      throw DimensionError("concat_cols: row counts differ, " +
                           ShapeString(parts[0].shape()) + " vs " +
                           ShapeString(p.shape()));
    }
    widths.push_back(p.dim(1));
    total += p.dim(1);
  }
  std::vector<double> out(r * total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto pv = parts[k].data();
    for (std::size_t i = 0; i < r; ++i)
      std::copy_n(pv.begin() + i * widths[k], widths[k],
                  out.begin() + i * total + offset);
    offset += widths[k];
  }
  return MakeOp({r, total}, std::move(out), "concat_cols", parts,
                [r, total, widths](Node &self) {
                  std::size_t offset = 0;
                  for (std::size_t k = 0; k < widths.size(); ++k) {
                    Node &in = Input(self, k);
                    if (in.requires_grad) {
                      auto &g = in.GradBuffer();
                      for (std::size_t i = 0; i < r; ++i)
                        for (std::size_t j = 0; j < widths[k]; ++j)
                          g[i * widths[k] + j] += self.grad[i * total + offset + j];
                    }
                    offset += widths[k];
                  }
                });
}

// ------------------------------------------------ explicit broadcasting

Tensor AddRowVector(const Tensor &x, const Tensor &row) {
  RequireRank(x, 2, "add_row_vector");
  const std::size_t r = x.dim(0), c = x.dim(1);
  if (row.numel() != c) {
    throw DimensionError("add_row_vector: " + ShapeString(row.shape()) +
                         " does not match columns of " + ShapeString(x.shape()));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  auto bv = row.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] += bv[j];
  return MakeOp(x.shape(), std::move(out), "add_row_vector", {x, row},
                [r, c](Node &self) {
                  Node &nx = Input(self, 0);
                  Node &nb = Input(self, 1);
                  if (nx.requires_grad) {
                    auto &g = nx.GradBuffer();
                    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                  }
                  if (nb.requires_grad) {
                    auto &g = nb.GradBuffer();
                    for (std::size_t i = 0; i < r; ++i)
                      for (std::size_t j = 0; j < c; ++j) g[j] += self.grad[i * c + j];
                  }
                });
}

Tensor ScaleRows(const Tensor &x, const Tensor &factors) {
  RequireRank(x, 2, "scale_rows");
  const std::size_t r = x.dim(0), c = x.dim(1);
  if (factors.numel() != r) {
    throw DimensionError("scale_rows: " + ShapeString(factors.shape()) +
                         " does not match rows of " + ShapeString(x.shape()));
  }
  std::vector<double> out(r * c);
  auto xv = x.data();
  auto sv = factors.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = xv[i * c + j] * sv[i];
  return MakeOp(x.shape(), std::move(out), "scale_rows", {x, factors},
                [r, c](Node &self) {
                  Node &nx = Input(self, 0);
                  Node &ns = Input(self, 1);
                  if (nx.requires_grad) {
                    auto &g = nx.GradBuffer();
                    for (std::size_t i = 0; i < r; ++i)
                      for (std::size_t j = 0; j < c; ++j)
                        g[i * c + j] += self.grad[i * c + j] * ns.value[i];
                  }
                  if (ns.requires_grad) {
                    auto &g = ns.GradBuffer();
                    for (std::size_t i = 0; i < r; ++i)
                      for (std::size_t j = 0; j < c; ++j)
                        g[i] += self.grad[i * c + j] * nx.value[i * c + j];
                  }
                });
}

Tensor NormalizeColumns(const Tensor &x, double floor) {
  RequireRank(x, 2, "normalize_columns");
  if (!(floor > 0)) throw DomainError("normalize_columns: floor must be positive");
  const std::size_t r = x.dim(0), c = x.dim(1);
  auto xv = x.data();
  std::vector<double> sums(c, 0.0);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) sums[j] += xv[i * c + j];
  std::vector<double> denom(c);
  for (std::size_t j = 0; j < c; ++j) denom[j] = std::max(sums[j], floor);
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = xv[i * c + j] / denom[j];
  return MakeOp(x.shape(), std::move(out), "normalize_columns", {x},
                [r, c, floor, sums, denom](Node &self) {
                  auto &g = Input(self, 0).GradBuffer();
                  for (std::size_t j = 0; j < c; ++j) {
                    // Below the floor the denominator is a constant.
                    double dot = 0.0;
                    if (sums[j] > floor) {
                      for (std::size_t i = 0; i < r; ++i)
                        dot += self.grad[i * c + j] * self.value[i * c + j];
                    }
                    for (std::size_t i = 0; i < r; ++i)
                      g[i * c + j] += (self.grad[i * c + j] - dot) / denom[j];
                  }
                });
}

Tensor ChannelAffine(const Tensor &x, const Tensor &gain, const Tensor &bias) {
  RequireRank(x, 3, "channel_affine");
  const std::size_t ch = x.dim(0), plane = x.dim(1) * x.dim(2);
  if (gain.numel() != ch || bias.numel() != ch) {
    throw DimensionError("channel_affine: gain/bias must have " +
                         std::to_string(ch) + " elements");
  }
  std::vector<double> out(x.numel());
  auto xv = x.data();
  for (std::size_t c = 0; c < ch; ++c)
    for (std::size_t i = 0; i < plane; ++i)
      out[c * plane + i] = gain[c] * xv[c * plane + i] + bias[c];
  return MakeOp(x.shape(), std::move(out), "channel_affine", {x, gain, bias},
                [ch, plane](Node &self) {
                  Node &nx = Input(self, 0);
                  Node &ng = Input(self, 1);
                  Node &nb = Input(self, 2);
                  for (std::size_t c = 0; c < ch; ++c) {
                    double dg = 0.0, db = 0.0;
                    for (std::size_t i = 0; i < plane; ++i) {
                      const double d = self.grad[c * plane + i];
                      dg += d * nx.value[c * plane + i];
                      db += d;
                    }
                    if (nx.requires_grad) {
                      auto &g = nx.GradBuffer();
                      for (std::size_t i = 0; i < plane; ++i)
                        g[c * plane + i] += self.grad[c * plane + i] * ng.value[c];
                    }
                    if (ng.requires_grad) ng.GradBuffer()[c] += dg;
                    if (nb.requires_grad) nb.GradBuffer()[c] += db;
                  }
                });
}

// ----------------------------------------------------------- nn layers

Tensor Softmax(const Tensor &x, std::size_t axis) {
  if (axis >= x.rank()) {
    throw DimensionError("softmax: axis " + std::to_string(axis) +
                         " invalid for shape " + ShapeString(x.shape()));
  }
  const auto &s = x.shape();
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t len = s[axis];
  auto xv = x.data();
  std::vector<double> out(x.numel());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * len * inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < len; ++k) mx = std::max(mx, xv[base + k * inner]);
      double z = 0.0;
      for (std::size_t k = 0; k < len; ++k) {
        const double e = std::exp(xv[base + k * inner] - mx);
        out[base + k * inner] = e;
        z += e;
      }
      for (std::size_t k = 0; k < len; ++k) out[base + k * inner] /= z;
    }
  }
  return MakeOp(s, std::move(out), "softmax", {x},
                [outer, inner, len](Node &self) {
                  auto &g = Input(self, 0).GradBuffer();
                  const auto &y = self.value;
                  const auto &dy = self.grad;
                  for (std::size_t o = 0; o < outer; ++o) {
                    for (std::size_t in = 0; in < inner; ++in) {
                      const std::size_t base = o * len * inner + in;
                      double dot = 0.0;
                      for (std::size_t k = 0; k < len; ++k)
                        dot += dy[base + k * inner] * y[base + k * inner];
                      for (std::size_t k = 0; k < len; ++k) {
                        const std::size_t i = base + k * inner;
                        g[i] += y[i] * (dy[i] - dot);
                      }
                    }
                  }
                });
}

Tensor LayerNorm(const Tensor &x, const Tensor &gain, const Tensor &bias,
                 double eps) {
  if (x.rank() == 0) throw DimensionError("layer_norm: rank-0 input");
  const std::size_t d = x.shape().back();
  if (gain.numel() != d || bias.numel() != d) {
    throw DimensionError("layer_norm: gain/bias size must equal last axis " +
                         std::to_string(d));
  }
  const std::size_t rows = x.numel() / d;
  auto xv = x.data();
  auto normalized = std::make_shared<std::vector<double>>(x.numel());
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  std::vector<double> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const double *row = xv.data() + r * d;
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += row[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = inv;
    for (std::size_t j = 0; j < d; ++j) {
      const double xh = (row[j] - mean) * inv;
      (*normalized)[r * d + j] = xh;
      out[r * d + j] = gain[j] * xh + bias[j];
    }
  }
  return MakeOp(x.shape(), std::move(out), "layer_norm", {x, gain, bias},
                [rows, d, normalized, inv_std](Node &self) {
                  Node &nx = Input(self, 0);
                  Node &ng = Input(self, 1);
                  Node &nb = Input(self, 2);
                  const auto &xh = *normalized;
                  const auto &dy = self.grad;
                  std::vector<double> dxh(d);
                  for (std::size_t r = 0; r < rows; ++r) {
                    double sum = 0.0, sum_xh = 0.0;
                    for (std::size_t j = 0; j < d; ++j) {
                      const std::size_t i = r * d + j;
                      dxh[j] = dy[i] * ng.value[j];
                      sum += dxh[j];
                      sum_xh += dxh[j] * xh[i];
                    }
                    if (nx.requires_grad) {
                      auto &g = nx.GradBuffer();
                      const double scale = (*inv_std)[r] / static_cast<double>(d);
                      for (std::size_t j = 0; j < d; ++j) {
                        const std::size_t i = r * d + j;
                        g[i] += scale * (static_cast<double>(d) * dxh[j] - sum -
                                         xh[i] * sum_xh);
                      }
                    }
                    if (ng.requires_grad) {
                      auto &g = ng.GradBuffer();
                      for (std::size_t j = 0; j < d; ++j) g[j] += dy[r * d + j] * xh[r * d + j];
                    }
                    if (nb.requires_grad) {
                      auto &g = nb.GradBuffer();
                      for (std::size_t j = 0; j < d; ++j) g[j] += dy[r * d + j];
                    }
                  }
                });
}

namespace {

struct ConvGeometry {
  std::size_t cin, h, w, cout, kh, kw, stride, pad, ho, wo;
};

// Unfolds input patches into a [cin*kh*kw x ho*wo] matrix.
void Im2Col(const double *in, const ConvGeometry &g, double *cols) {
  const std::size_t npix = g.ho * g.wo;
  for (std::size_t c = 0; c < g.cin; ++c) {
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        double *dst = cols + ((c * g.kh + ki) * g.kw + kj) * npix;
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ki) -
                                    static_cast<std::ptrdiff_t>(g.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) {
            std::fill_n(dst + oy * g.wo, g.wo, 0.0);
            continue;
          }
          const double *src = in + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kj) -
                                      static_cast<std::ptrdiff_t>(g.pad);
            dst[oy * g.wo + ox] =
                (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) ? 0.0 : src[ix];
          }
        }
      }
    }
  }
}

void Col2ImAdd(const double *cols, const ConvGeometry &g, double *in) {
  const std::size_t npix = g.ho * g.wo;
  for (std::size_t c = 0; c < g.cin; ++c) {
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        const double *src = cols + ((c * g.kh + ki) * g.kw + kj) * npix;
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ki) -
                                    static_cast<std::ptrdiff_t>(g.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
          double *dst = in + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kj) -
                                      static_cast<std::ptrdiff_t>(g.pad);
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(g.w))
              dst[ix] += src[oy * g.wo + ox];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor Conv2d(const Tensor &input, const Tensor &kernel, const Tensor &bias,
              std::size_t stride, std::size_t padding) {
  RequireRank(input, 3, "conv2d input");
  RequireRank(kernel, 4, "conv2d kernel");
  if (stride == 0) throw DimensionError("conv2d: stride must be positive");
  ConvGeometry g{};
  g.cin = input.dim(0);
  g.h = input.dim(1);
  g.w = input.dim(2);
  g.cout = kernel.dim(0);
  g.kh = kernel.dim(2);
  g.kw = kernel.dim(3);
  g.stride = stride;
  g.pad = padding;
  if (kernel.dim(1) != g.cin) {
    throw DimensionError("conv2d: kernel " + ShapeString(kernel.shape()) +
                         " expects " + std::to_string(kernel.dim(1)) +
                         " input channels, input is " + ShapeString(input.shape()));
  }
  if (g.h + 2 * padding < g.kh || g.w + 2 * padding < g.kw) {
    throw DimensionError("conv2d: kernel " + ShapeString(kernel.shape()) +
                         " larger than padded input " + ShapeString(input.shape()));
  }
  if (bias.defined() && bias.numel() != g.cout) {
    throw DimensionError("conv2d: bias must have " + std::to_string(g.cout) +
                         " elements");
  }
  g.ho = (g.h + 2 * padding - g.kh) / stride + 1;
  g.wo = (g.w + 2 * padding - g.kw) / stride + 1;
  const std::size_t krows = g.cin * g.kh * g.kw;
  const std::size_t npix = g.ho * g.wo;

  auto cols = std::make_shared<std::vector<double>>(krows * npix);
  Im2Col(input.data().data(), g, cols->data());
  std::vector<double> out(g.cout * npix);
  MapMat(out.data(), g.cout, npix).noalias() =
      ConstMapMat(kernel.data().data(), g.cout, krows) *
      ConstMapMat(cols->data(), krows, npix);
  if (bias.defined()) {
    for (std::size_t c = 0; c < g.cout; ++c)
      for (std::size_t i = 0; i < npix; ++i) out[c * npix + i] += bias[c];
  }
  std::vector<Tensor> inputs{input, kernel};
  if (bias.defined()) inputs.push_back(bias);
  return MakeOp({g.cout, g.ho, g.wo}, std::move(out), "conv2d", inputs,
                [g, krows, npix, cols](Node &self) {
                  Node &nin = Input(self, 0);
                  Node &nk = Input(self, 1);
                  ConstMapMat dy(self.grad.data(), g.cout, npix);
                  if (nk.requires_grad) {
                    MapMat(nk.GradBuffer().data(), g.cout, krows).noalias() +=
                        dy * ConstMapMat(cols->data(), krows, npix).transpose();
                  }
                  if (nin.requires_grad) {
                    std::vector<double> dcols(krows * npix);
                    MapMat(dcols.data(), krows, npix).noalias() =
                        ConstMapMat(nk.value.data(), g.cout, krows).transpose() * dy;
                    Col2ImAdd(dcols.data(), g, nin.GradBuffer().data());
                  }
                  if (self.inputs.size() > 2 && Input(self, 2).requires_grad) {
                    auto &gb = Input(self, 2).GradBuffer();
                    // Plain loop: Eigen's vectorized sum depends on pointer alignment.
                    for (std::size_t c = 0; c < g.cout; ++c) {
                      double s = 0;
                      for (std::size_t i = 0; i < npix; ++i) s += self.grad[c * npix + i];
                      gb[c] += s;
                    }
                  }
                });
}

Tensor Upsample2x(const Tensor &input) {
  RequireRank(input, 3, "upsample2x");
  const std::size_t ch = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t h2 = 2 * h, w2 = 2 * w;
  std::vector<double> out(ch * h2 * w2);
  auto xv = input.data();
  for (std::size_t c = 0; c < ch; ++c)
    for (std::size_t y = 0; y < h2; ++y)
      for (std::size_t x = 0; x < w2; ++x)
        out[(c * h2 + y) * w2 + x] = xv[(c * h + y / 2) * w + x / 2];
  return MakeOp({ch, h2, w2}, std::move(out), "upsample2x", {input},
                [ch, h, w, h2, w2](Node &self) {
                  auto &g = Input(self, 0).GradBuffer();
                  for (std::size_t c = 0; c < ch; ++c)
                    for (std::size_t y = 0; y < h2; ++y)
                      for (std::size_t x = 0; x < w2; ++x)
                        g[(c * h + y / 2) * w + x / 2] += self.grad[(c * h2 + y) * w2 + x];
                });
}

Tensor Upsample2xConv(const Tensor &input, const Tensor &kernel,
                      const Tensor &bias) {
  RequireRank(kernel, 4, "upsample2x_conv kernel");
  if (kernel.dim(2) != 3 || kernel.dim(3) != 3) {
    throw DimensionError("upsample2x_conv: kernel must be 3x3, got " +
                         ShapeString(kernel.shape()));
  }
  return Conv2d(Upsample2x(input), kernel, bias, 1, 1);
}

Tensor GumbelSoftmaxHard(const Tensor &logits, double tau, std::mt19937_64 &rng) {
  RequireRank(logits, 2, "gumbel_softmax_hard");
  if (!(tau > 0)) throw DomainError("gumbel_softmax_hard: temperature must be positive");
  const std::size_t r = logits.dim(0), c = logits.dim(1);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  auto soft = std::make_shared<std::vector<double>>(r * c);
  std::vector<double> hard(r * c, 0.0);
  auto lv = logits.data();
  std::vector<double> perturbed(c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      double u = uniform(rng);
      while (u <= 0.0) u = uniform(rng);
      perturbed[j] = (lv[i * c + j] - std::log(-std::log(u))) / tau;
    }
    const double mx = *std::max_element(perturbed.begin(), perturbed.end());
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(perturbed[j] - mx);
    std::size_t best = 0;
    for (std::size_t j = 0; j < c; ++j) {
      (*soft)[i * c + j] = std::exp(perturbed[j] - mx) / z;
      if (perturbed[j] > perturbed[best]) best = j;
    }
    hard[i * c + best] = 1.0;
  }
  return MakeOp({r, c}, std::move(hard), "gumbel_softmax_hard", {logits},
                [r, c, tau, soft](Node &self) {
                  auto &g = Input(self, 0).GradBuffer();
                  const auto &y = *soft;
                  for (std::size_t i = 0; i < r; ++i) {
                    double dot = 0.0;
                    for (std::size_t j = 0; j < c; ++j) dot += self.grad[i * c + j] * y[i * c + j];
                    for (std::size_t j = 0; j < c; ++j) {
                      const std::size_t k = i * c + j;
                      g[k] += y[k] * (self.grad[k] - dot) / tau;
                    }
                  }
                });
}

// --------------------------------------------------------------- losses

Tensor BceWithLogits(const Tensor &logits, std::span<const double> targets) {
  if (targets.size() != logits.numel()) {
    throw DimensionError("bce: " + std::to_string(targets.size()) +
                         " targets for logits " + ShapeString(logits.shape()));
  }
  for (double t : targets) {
    if (!(t >= 0.0 && t <= 1.0)) throw DomainError("bce: target outside [0, 1]");
  }
  const std::size_t n = targets.size();
  auto zv = logits.data();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double z = zv[i];
    total += std::max(z, 0.0) - z * targets[i] + std::log1p(std::exp(-std::abs(z)));
  }
  std::vector<double> t(targets.begin(), targets.end());
  return MakeOp({1}, {total / static_cast<double>(n)}, "bce_with_logits", {logits},
                [t = std::move(t)](Node &self) {
                  Node &nz = Input(self, 0);
                  auto &g = nz.GradBuffer();
                  const double scale = self.grad[0] / static_cast<double>(t.size());
                  for (std::size_t i = 0; i < t.size(); ++i)
                    g[i] += scale * (StableSigmoid(nz.value[i]) - t[i]);
                });
}

Tensor CrossEntropy(const Tensor &logits, std::span<const std::size_t> targets) {
  RequireRank(logits, 2, "cross_entropy");
  const std::size_t r = logits.dim(0), c = logits.dim(1);
  if (targets.size() != r) {
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) +
                         " targets for " + std::to_string(r) + " rows");
  }
  for (auto t : targets) {
    if (t >= c) {
      throw DimensionError("cross_entropy: target index " + std::to_string(t) +
                           " out of range for " + std::to_string(c) + " classes");
    }
  }
  auto zv = logits.data();
  auto probs = std::make_shared<std::vector<double>>(r * c);
  double total = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    const double *row = zv.data() + i * c;
    const double mx = *std::max_element(row, row + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(row[j] - mx);
    const double lse = mx + std::log(z);
    total += lse - row[targets[i]];
    for (std::size_t j = 0; j < c; ++j) (*probs)[i * c + j] = std::exp(row[j] - lse);
  }
  std::vector<std::size_t> t(targets.begin(), targets.end());
  return MakeOp({1}, {total}, "cross_entropy", {logits},
                [c, probs, t = std::move(t)](Node &self) {
                  auto &g = Input(self, 0).GradBuffer();
                  for (std::size_t i = 0; i < t.size(); ++i) {
                    for (std::size_t j = 0; j < c; ++j) {
                      const double onehot = (j == t[i]) ? 1.0 : 0.0;
                      g[i * c + j] += self.grad[0] * ((*probs)[i * c + j] - onehot);
                    }
                  }
                });
}

Tensor CeLoss(const Tensor &logits, std::size_t target_index) {
  RequireRank(logits, 1, "ce_loss");
  const std::size_t target[1] = {target_index};
  return CrossEntropy(Reshape(logits, {1, logits.numel()}), target);
}

}  // namespace sgn::ad
