// Copyright 2026 The SGN Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cmath>
#include <algorithm>
#include <random>
#include <set>
#include <vector>

#include "doctest.h"
#include "sgn/autodiff/grad_check.h"
#include "sgn/autodiff/ops.h"
#include "sgn/autodiff/optim.h"
#include "sgn/autodiff/tensor.h"
#include "sgn/common/error.h"

using namespace sgn::ad;

namespace {

Tensor RandomTensor(Shape shape, std::mt19937_64 &rng, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  std::vector<double> data(NumElements(shape));
  for (auto &v : data) v = dist(rng);
  return Tensor::FromData(std::move(shape), std::move(data), true);
}

// Weighted sum with fixed random weights, so gradients of shift-invariant
// ops (softmax, layer norm) are not identically zero.
Tensor Probe(const Tensor &out, const Tensor &weights) {
  return Sum(Mul(out, weights));
}

Tensor Weights(const Shape &shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> w(NumElements(shape));
  for (auto &v : w) v = dist(rng);
  return Tensor::FromData(shape, std::move(w));
}

}  // namespace

TEST_CASE("matmul forward values") {
  auto eye = Tensor::FromData({2, 2}, {1, 0, 0, 1});
  auto b = Tensor::FromData({2, 2}, {3, 4, 5, 6});
  auto c = MatMul(eye, b);
  CHECK(std::vector<double>(c.data().begin(), c.data().end()) ==
        std::vector<double>{3, 4, 5, 6});
  auto row = Tensor::FromData({1, 2}, {1, 2});
  auto col = Tensor::FromData({2, 1}, {3, 4});
  CHECK(MatMul(row, col).item() == 11.0);
}

TEST_CASE("matmul shape mismatch reports both shapes") {
  auto a = Tensor::Zeros({2, 3});
  auto b = Tensor::Zeros({2, 3});
  try {
    MatMul(a, b);
    FAIL("expected DimensionError");
  } catch (const sgn::DimensionError &e) {
    std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
  }
}

TEST_CASE("matmul gradient matches finite differences") {
  std::mt19937_64 rng(1);
  auto a = RandomTensor({5, 7}, rng);
  auto b = RandomTensor({7, 3}, rng);
  auto report = GradCheck([&] { return Sum(MatMul(a, b)); },
                          {{"a", a}, {"b", b}}, {.tolerance = 1e-6});
  CHECK(report.passed);
  CHECK(report.max_rel_error < 1e-6);
}

TEST_CASE("softmax values and stability") {
  auto s = Softmax(Tensor::FromData({3}, {0, 0, 0}), 0);
  for (double v : s.data()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  auto big = Softmax(Tensor::FromData({2}, {1000, 0}), 0);
  CHECK(big[0] == 1.0);
  CHECK(big[1] >= 0.0);
  CHECK(big[1] < 1e-300);
}

TEST_CASE("softmax is row-stochastic along any axis") {
  std::mt19937_64 rng(2);
  auto x = RandomTensor({3, 4, 5}, rng, 3.0);
  for (std::size_t axis = 0; axis < 3; ++axis) {
    auto y = Softmax(x, axis);
    const auto &s = x.shape();
    std::size_t inner = 1;
    for (std::size_t i = axis + 1; i < 3; ++i) inner *= s[i];
    std::size_t outer = x.numel() / (s[axis] * inner);
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t in = 0; in < inner; ++in) {
        double sum = 0;
        for (std::size_t k = 0; k < s[axis]; ++k) sum += y[o * s[axis] * inner + k * inner + in];
        CHECK(std::abs(sum - 1.0) < 1e-12);
      }
  }
  CHECK_THROWS_AS(Softmax(x, 3), sgn::DimensionError);
}

TEST_CASE("softmax gradient matches finite differences") {
  std::mt19937_64 rng(3);
  auto x = RandomTensor({4, 6}, rng);
  for (std::size_t axis : {0u, 1u}) {
    auto w = Weights({4, 6}, 10 + axis);
    auto report = GradCheck([&] { return Probe(Softmax(x, axis), w); }, {{"x", x}},
                            {.tolerance = 1e-6});
    CHECK(report.passed);
  }
}

TEST_CASE("conv2d forward geometry") {
  auto ones = Tensor::Full({1, 4, 4}, 1.0);
  auto k = Tensor::Full({1, 1, 2, 2}, 1.0);
  auto y = Conv2d(ones, k, {}, 2, 0);
  CHECK(y.shape() == Shape{1, 2, 2});
  for (double v : y.data()) CHECK(v == 4.0);

  auto patch = Tensor::Full({1, 16, 16}, 0.5);
  auto k8 = Tensor::Full({8, 1, 16, 16}, 1.0);
  auto p = Conv2d(patch, k8, {}, 16, 0);
  CHECK(p.shape() == Shape{8, 1, 1});
  CHECK(p[0] == doctest::Approx(128.0));

  CHECK_THROWS_AS(Conv2d(Tensor::Zeros({1, 2, 2}), Tensor::Zeros({1, 1, 5, 5}), {}, 1, 1),
                  sgn::DimensionError);
  CHECK_THROWS_AS(Conv2d(Tensor::Zeros({2, 4, 4}), Tensor::Zeros({1, 1, 3, 3}), {}, 1, 1),
                  sgn::DimensionError);
}

TEST_CASE("conv2d is a cross-correlation (no kernel flip)") {
  // A kernel that picks the right neighbour shifts the image left.
  auto img = Tensor::FromData({1, 1, 3}, {1, 2, 3});
  auto k = Tensor::FromData({1, 1, 1, 3}, {0, 0, 1});
  auto y = Conv2d(img, k, {}, 1, 1);
  // padding 1 in both axes: output is 3x3, middle row holds the shifted line.
  CHECK(y.shape() == Shape{1, 3, 3});
  CHECK(y[3] == 2.0);
  CHECK(y[4] == 3.0);
  CHECK(y[5] == 0.0);
}

TEST_CASE("conv2d gradient matches finite differences") {
  std::mt19937_64 rng(4);
  auto x = RandomTensor({2, 6, 6}, rng);
  auto k = RandomTensor({3, 2, 3, 3}, rng);
  auto b = RandomTensor({3}, rng);
  auto w = Weights({3, 6, 6}, 5);
  auto report = GradCheck([&] { return Probe(Conv2d(x, k, b, 1, 1), w); },
                          {{"x", x}, {"k", k}, {"b", b}}, {.tolerance = 1e-5});
  CHECK(report.passed);
  // Strided, asymmetric padding geometry used by the U-Net encoder.
  auto x2 = RandomTensor({2, 8, 8}, rng);
  auto k2 = RandomTensor({3, 2, 4, 4}, rng);
  auto w2 = Weights({3, 4, 4}, 6);
  auto report2 = GradCheck([&] { return Probe(Conv2d(x2, k2, {}, 2, 1), w2); },
                           {{"x", x2}, {"k", k2}}, {.tolerance = 1e-5});
  CHECK(report2.passed);
}

TEST_CASE("upsample2x_conv") {
  auto x = Tensor::FromData({1, 2, 2}, {1, 2, 3, 4});
  auto up = Upsample2x(x);
  CHECK(up.shape() == Shape{1, 4, 4});
  const std::vector<double> expected{1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4};
  CHECK(std::vector<double>(up.data().begin(), up.data().end()) == expected);

  std::vector<double> identity(9, 0.0);
  identity[4] = 1.0;
  auto y = Upsample2xConv(x, Tensor::FromData({1, 1, 3, 3}, identity), {});
  CHECK(std::vector<double>(y.data().begin(), y.data().end()) == expected);

  std::mt19937_64 rng(5);
  auto xi = RandomTensor({2, 3, 3}, rng);
  auto k = RandomTensor({2, 2, 3, 3}, rng);
  auto b = RandomTensor({2}, rng);
  auto w = Weights({2, 6, 6}, 7);
  auto report = GradCheck([&] { return Probe(Upsample2xConv(xi, k, b), w); },
                          {{"x", xi}, {"k", k}, {"b", b}}, {.tolerance = 1e-5});
  CHECK(report.passed);
}

TEST_CASE("layer_norm") {
  auto gain = Tensor::Full({4}, 1.0);
  auto bias = Tensor::Zeros({4});
  auto y = LayerNorm(Tensor::FromData({4}, {5, 5, 5, 5}), gain, bias);
  for (double v : y.data()) CHECK(v == 0.0);

  auto y2 = LayerNorm(Tensor::FromData({2}, {1, -1}), Tensor::Full({2}, 1.0),
                      Tensor::Zeros({2}));
  const double expected = 1.0 / std::sqrt(1.0 + 1e-5);
  CHECK(y2[0] == doctest::Approx(expected).epsilon(1e-14));
  CHECK(y2[1] == doctest::Approx(-expected).epsilon(1e-14));

  std::mt19937_64 rng(6);
  auto x = RandomTensor({3, 5}, rng);
  auto g = RandomTensor({5}, rng);
  auto b = RandomTensor({5}, rng);
  auto w = Weights({3, 5}, 8);
  auto report = GradCheck([&] { return Probe(LayerNorm(x, g, b), w); },
                          {{"x", x}, {"g", g}, {"b", b}}, {.tolerance = 1e-5});
  CHECK(report.passed);
}

TEST_CASE("elementwise values") {
  CHECK(Sigmoid(Tensor::Scalar(0.0)).item() == 0.5);
  CHECK(Relu(Tensor::Scalar(-3.0)).item() == 0.0);
  CHECK(Relu(Tensor::Scalar(3.0)).item() == 3.0);
  CHECK(LeakyRelu(Tensor::Scalar(-2.0), 0.2).item() == doctest::Approx(-0.4));
  CHECK(Gelu(Tensor::Scalar(0.0)).item() == 0.0);
  CHECK(Log1p(Tensor::Scalar(std::exp(1.0) - 1.0)).item() == doctest::Approx(1.0));
  CHECK_THROWS_AS(Log1p(Tensor::Scalar(-1.0)), sgn::DomainError);
  CHECK_THROWS_AS(Reciprocal(Tensor::Scalar(0.0)), sgn::DomainError);
  // Sigmoid saturates without producing NaN.
  CHECK(Sigmoid(Tensor::Scalar(-800.0)).item() == 0.0);
}

TEST_CASE("elementwise gradients match finite differences") {
  std::mt19937_64 rng(7);
  // Keep inputs away from the relu kink and the log1p pole.
  std::vector<double> vals;
  std::uniform_real_distribution<double> mag(0.2, 2.0);
  for (int i = 0; i < 12; ++i) vals.push_back(i % 2 ? mag(rng) : -mag(rng) * 0.4);
  auto x = Tensor::FromData({3, 4}, vals, true);
  auto y = RandomTensor({3, 4}, rng);
  auto s = RandomTensor({1}, rng);
  auto w = Weights({3, 4}, 9);
  const GradCheckOptions opt{.tolerance = 1e-6};
  CHECK(GradCheck([&] { return Probe(Sigmoid(x), w); }, {{"x", x}}, opt).passed);
  CHECK(GradCheck([&] { return Probe(Relu(x), w); }, {{"x", x}}, opt).passed);
  CHECK(GradCheck([&] { return Probe(LeakyRelu(x, 0.2), w); }, {{"x", x}}, opt).passed);
  CHECK(GradCheck([&] { return Probe(Gelu(x), w); }, {{"x", x}}, opt).passed);
  CHECK(GradCheck([&] { return Probe(Log1p(x), w); }, {{"x", x}}, opt).passed);
  CHECK(GradCheck([&] { return Probe(Exp(x), w); }, {{"x", x}}, opt).passed);
  CHECK(GradCheck([&] { return Probe(Reciprocal(x), w); }, {{"x", x}}, opt).passed);
  CHECK(GradCheck([&] { return Probe(Add(x, y), w); }, {{"x", x}, {"y", y}}, opt).passed);
  CHECK(GradCheck([&] { return Probe(Sub(x, y), w); }, {{"x", x}, {"y", y}}, opt).passed);
  CHECK(GradCheck([&] { return Probe(Mul(x, y), w); }, {{"x", x}, {"y", y}}, opt).passed);
  CHECK(GradCheck([&] { return Probe(Mul(x, s), w); }, {{"x", x}, {"s", s}}, opt).passed);
  CHECK(GradCheck([&] { return Probe(Scale(x, -1.7), w); }, {{"x", x}}, opt).passed);
}

TEST_CASE("broadcasting is limited to scalar operands") {
  auto a = Tensor::Zeros({2, 3});
  CHECK_NOTHROW(Add(a, Tensor::Scalar(1.0)));
  CHECK_NOTHROW(Mul(Tensor::Scalar(2.0), a));
  CHECK_THROWS_AS(Add(a, Tensor::Zeros({3})), sgn::DimensionError);
  CHECK_THROWS_AS(Add(a, Tensor::Zeros({3, 2})), sgn::DimensionError);
}

TEST_CASE("shape ops gradients") {
  std::mt19937_64 rng(8);
  auto x = RandomTensor({5, 4}, rng);
  auto y = RandomTensor({2, 4}, rng);
  auto r = RandomTensor({4}, rng);
  auto s = RandomTensor({5}, rng);
  const GradCheckOptions opt{.tolerance = 1e-6};
  const std::size_t rows[] = {4, 0, 4};
  CHECK(GradCheck([&] { return Probe(GatherRows(x, rows), Weights({3, 4}, 1)); },
                  {{"x", x}}, opt).passed);
  CHECK(GradCheck([&] { return Probe(ConcatRows({x, y}), Weights({7, 4}, 2)); },
                  {{"x", x}, {"y", y}}, opt).passed);
  CHECK(GradCheck([&] { return Probe(SliceRows(x, 1, 3), Weights({3, 4}, 3)); },
                  {{"x", x}}, opt).passed);
  CHECK(GradCheck([&] { return Probe(SliceCols(x, 1, 2), Weights({5, 2}, 4)); },
                  {{"x", x}}, opt).passed);
  CHECK(GradCheck([&] { return Probe(ConcatCols({x, SliceCols(x, 0, 1)}), Weights({5, 5}, 5)); },
                  {{"x", x}}, opt).passed);
  CHECK(GradCheck([&] { return Probe(Transpose(x), Weights({4, 5}, 6)); },
                  {{"x", x}}, opt).passed);
  CHECK(GradCheck([&] { return Probe(ColumnSum(x), Weights({4}, 7)); },
                  {{"x", x}}, opt).passed);
  CHECK(GradCheck([&] { return Probe(AddRowVector(x, r), Weights({5, 4}, 8)); },
                  {{"x", x}, {"r", r}}, opt).passed);
  CHECK(GradCheck([&] { return Probe(ScaleRows(x, s), Weights({5, 4}, 9)); },
                  {{"x", x}, {"s", s}}, opt).passed);
  auto img = RandomTensor({3, 2, 2}, rng);
  auto gain = RandomTensor({3}, rng);
  auto bias = RandomTensor({3}, rng);
  CHECK(GradCheck([&] { return Probe(ChannelAffine(img, gain, bias), Weights({3, 2, 2}, 10)); },
                  {{"img", img}, {"gain", gain}, {"bias", bias}}, opt).passed);
  CHECK_THROWS_AS(GatherRows(x, std::vector<std::size_t>{5}), sgn::DimensionError);
}

TEST_CASE("normalize_columns") {
  auto a = Tensor::FromData({2, 3}, {1, 0, 0.5, 3, 0, 0.5}, true);
  auto n = NormalizeColumns(a, 1e-6);
  CHECK(n[0] == 0.25);
  CHECK(n[3] == 0.75);
  CHECK(n[1] == 0.0);  // empty column stays zero
  CHECK(n[2] == 0.5);
  auto single = NormalizeColumns(Tensor::FromData({1, 3}, {0.3, 0.2, 0.7}), 1e-6);
  for (double v : single.data()) CHECK(v == 1.0);

  std::mt19937_64 rng(18);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  std::vector<double> vals(12);
  for (auto &v : vals) v = u(rng);
  auto x = Tensor::FromData({4, 3}, vals, true);
  auto report = GradCheck([&] { return Probe(NormalizeColumns(x, 1e-6), Weights({4, 3}, 19)); },
                          {{"x", x}}, {.tolerance = 1e-6});
  CHECK(report.passed);
  // Below the floor the op is a plain scaling.
  auto tiny = Tensor::FromData({2, 1}, {1e-8, 2e-8}, true);
  auto r2 = GradCheck([&] { return Probe(NormalizeColumns(tiny, 1e-6), Weights({2, 1}, 20)); },
                      {{"t", tiny}}, {.tolerance = 1e-6, .epsilon = 1e-10});
  CHECK(r2.passed);
}

TEST_CASE("bce with logits") {
  std::vector<double> t{0.0, 1.0, 0.3, 1.0};
  auto half = BceWithLogits(Tensor::Zeros({4}), t);
  CHECK(half.item() == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  auto perfect = BceWithLogits(Tensor::FromData({2}, {-20.0, 20.0}), std::vector<double>{0, 1});
  CHECK(perfect.item() < 1e-8);
  CHECK_THROWS_AS(BceWithLogits(Tensor::Zeros({1}), std::vector<double>{1.5}), sgn::DomainError);

  std::mt19937_64 rng(9);
  auto z = RandomTensor({4}, rng, 2.0);
  auto report = GradCheck([&] { return BceWithLogits(z, t); }, {{"z", z}}, {.tolerance = 1e-6});
  CHECK(report.passed);
}

TEST_CASE("cross entropy") {
  CHECK(CeLoss(Tensor::Zeros({3}), 0).item() == doctest::Approx(std::log(3.0)).epsilon(1e-14));
  CHECK(CeLoss(Tensor::FromData({3}, {20, 0, 0}), 0).item() < 1e-8);
  CHECK_THROWS(CeLoss(Tensor::Zeros({3}), 3));

  std::mt19937_64 rng(10);
  auto z = RandomTensor({3, 4}, rng, 2.0);
  const std::size_t targets[] = {0, 3, 1};
  auto report = GradCheck([&] { return CrossEntropy(z, targets); }, {{"z", z}},
                          {.tolerance = 1e-6});
  CHECK(report.passed);
}

TEST_CASE("losses are non-negative") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    auto z = RandomTensor({6}, rng, 5.0);
    std::vector<double> t(6);
    for (auto &v : t) v = u(rng);
    CHECK(BceWithLogits(z, t).item() >= 0.0);
    CHECK(CeLoss(z, trial % 6).item() >= 0.0);
  }
}

TEST_CASE("gumbel straight-through: one-hot forward, soft backward") {
  std::mt19937_64 rng(12);
  auto logits = RandomTensor({5, 4}, rng);
  std::mt19937_64 a(99), b(99);
  auto hard = GumbelSoftmaxHard(logits, 1.0, a);
  for (std::size_t i = 0; i < 5; ++i) {
    double sum = 0, mx = 0;
    for (std::size_t j = 0; j < 4; ++j) {
      sum += hard[i * 4 + j];
      mx = std::max(mx, hard[i * 4 + j]);
    }
    CHECK(sum == 1.0);
    CHECK(mx == 1.0);
  }
  // Backward equals the gradient of softmax((logits + g) / tau) computed
  // with the same noise draw.
  auto w = Weights({5, 4}, 13);
  Backward(Probe(hard, w));
  std::vector<double> st_grad(logits.grad().begin(), logits.grad().end());
  logits.ZeroGrad();

  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::vector<double> noise(20);
  for (auto &v : noise) {
    double u = uniform(b);
    while (u <= 0.0) u = uniform(b);
    v = -std::log(-std::log(u));
  }
  auto soft = Softmax(Add(logits, Tensor::FromData({5, 4}, noise)), 1);
  Backward(Probe(soft, w));
  for (std::size_t i = 0; i < 20; ++i) CHECK(st_grad[i] == doctest::Approx(logits.grad()[i]).epsilon(1e-12));
}

TEST_CASE("sgd step") {
  SUBCASE("plain sgd") {
    Parameter p("w", Tensor::Scalar(5.0, true));
    p.value.mutable_grad()[0] = 1.0;
    Parameter *ps[] = {&p};
    SgdStep(ps, 0.1, 0.0);
    CHECK(p.value.item() == doctest::Approx(4.9).epsilon(1e-15));
    CHECK_FALSE(p.value.has_grad());
  }
  SUBCASE("momentum recursion") {
    Parameter p("w", Tensor::Scalar(0.0, true));
    Parameter *ps[] = {&p};
    for (int step = 0; step < 2; ++step) {
      p.value.mutable_grad()[0] = 1.0;
      SgdStep(ps, 0.1, 0.9);
    }
    CHECK(p.value.item() == doctest::Approx(-0.29).epsilon(1e-14));
  }
  SUBCASE("zero grad is a fixed point and lr 0 changes nothing") {
    Parameter p("w", Tensor::FromData({3}, {1, 2, 3}, true));
    Parameter *ps[] = {&p};
    p.value.mutable_grad();
    SgdStep(ps, 0.1, 0.9);
    CHECK(p.value[1] == 2.0);
    p.value.mutable_grad()[1] = 4.0;
    SgdStep(ps, 0.0, 0.9);
    CHECK(p.value[1] == 2.0);
  }
  SUBCASE("missing gradient names the parameter") {
    Parameter p("decoder.w", Tensor::Scalar(1.0, true));
    Parameter *ps[] = {&p};
    try {
      SgdStep(ps, 0.1, 0.9);
      FAIL("expected error");
    } catch (const sgn::Error &e) {
      CHECK(std::string(e.what()).find("decoder.w") != std::string::npos);
    }
  }
}

TEST_CASE("sgd decreases a convex quadratic") {
  std::mt19937_64 rng(14);
  Parameter p("w", RandomTensor({8}, rng));
  Parameter *ps[] = {&p};
  double prev = Sum(Mul(p.value, p.value)).item();
  for (int i = 0; i < 20; ++i) {
    Backward(Sum(Mul(p.value, p.value)));
    SgdStep(ps, 0.01, 0.0);
    const double cur = Sum(Mul(p.value, p.value)).item();
    CHECK(cur < prev);
    prev = cur;
  }
}

TEST_CASE("grad_check reports") {
  std::mt19937_64 rng(15);
  auto w = RandomTensor({10}, rng);
  auto quad = GradCheck([&] { return Sum(Mul(w, w)); }, {{"w", w}}, {.tolerance = 1e-8});
  CHECK(quad.passed);
  CHECK(quad.max_rel_error < 1e-8);
  CHECK(quad.checked == 10);

  // Negative control: an op whose backward is deliberately off by 2x.
  auto wrong = [&] {
    std::vector<double> v(w.data().begin(), w.data().end());
    for (auto &e : v) e = 3.0 * e;
    return Sum(MakeOp(w.shape(), v, "bad_triple", {w}, [](Node &self) {
      auto &g = self.inputs[0]->GradBuffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += 6.0 * self.grad[i];
    }));
  };
  auto bad = GradCheck(wrong, {{"w", w}}, {.tolerance = 1e-5});
  CHECK_FALSE(bad.passed);
  CHECK(bad.max_rel_error > 0.4);

  CHECK_THROWS_AS(GradCheck([&] { return Mul(w, w); }, {{"w", w}}), sgn::DimensionError);

  // Subsampling above the element budget.
  auto big = RandomTensor({50}, rng);
  auto sub = GradCheck([&] { return Sum(Mul(big, big)); }, {{"big", big}},
                       {.tolerance = 1e-8, .max_elements = 20});
  CHECK(sub.checked == 20);
}

TEST_CASE("tape visits every op once and reaches every leaf") {
  std::mt19937_64 rng(16);
  auto a = RandomTensor({3, 3}, rng);
  auto b = RandomTensor({3, 3}, rng);
  auto shared = MatMul(a, b);
  // `shared` feeds two branches; the tape must record it once.
  auto out = Sum(Add(Sigmoid(shared), Relu(shared)));
  auto tape = Tape::Record(out);
  // a, b, matmul, sigmoid, relu, add, sum
  CHECK(tape.size() == 7);
  std::set<Node *> unique(tape.order().begin(), tape.order().end());
  CHECK(unique.size() == tape.size());
  CHECK(tape.order().back() == out.node());
  tape.ReplayBackward();
  CHECK(a.has_grad());
  CHECK(b.has_grad());
}

TEST_CASE("no-grad mode records nothing") {
  auto a = Tensor::Full({2}, 1.0, true);
  NoGradGuard guard;
  auto y = Mul(a, a);
  CHECK_FALSE(y.requires_grad());
  CHECK(y.node()->inputs.empty());
}

TEST_CASE("non-finite values are an error surface") {
  CHECK_THROWS_AS(Tensor::FromData({1}, {std::nan("")}), sgn::NonFiniteError);
  CHECK_THROWS_AS(Exp(Tensor::Scalar(1000.0)), sgn::NonFiniteError);
}

TEST_CASE("forward passes are bitwise deterministic") {
  std::mt19937_64 rng(17);
  auto x = RandomTensor({2, 8, 8}, rng);
  auto k = RandomTensor({4, 2, 3, 3}, rng);
  auto y1 = Softmax(Conv2d(x, k, {}, 1, 1), 0);
  auto y2 = Softmax(Conv2d(x, k, {}, 1, 1), 0);
  CHECK(std::equal(y1.data().begin(), y1.data().end(), y2.data().begin()));
}
