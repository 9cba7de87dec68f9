// Copyright (c) 2026, The sendd-desk authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "sendd/autodiff/gradcheck.hpp"
#include "sendd/autodiff/ops.hpp"
#include "sendd/autodiff/ops_image.hpp"
#include "sendd/autodiff/parameters.hpp"
#include "sendd/autodiff/tape.hpp"
#include "sendd/errors.hpp"

using namespace sendd;
using namespace sendd::ad;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = u(rng);
  return t;
}

// Gradient check of a scalar function of one parameter "x".
double check_unary(Tensor x, const std::function<Var(Tape&, const Var&)>& f) {
  ParameterStore store;
  store.add("x", std::move(x));
  auto r = finite_diff_check([&](Tape& t, ParamBinding& p) { return f(t, p("x")); }, store, 1e-6);
  return r.max_relative_error;
}

}  // namespace

TEST(Ops, LinearExamples) {
  Tape t;
  auto y = linear(t.constant(Tensor({1, 2}, {1, 2})), t.constant(Tensor({2, 2}, {1, 0, 0, 1})),
                  t.constant(Tensor({2}, {0, 0})));
  EXPECT_EQ(y.value(), Tensor({1, 2}, {1, 2}));
  auto z = linear(t.constant(Tensor({1, 2}, {1, 1})), t.constant(Tensor({2, 1}, {2, 3})),
                  t.constant(Tensor({1}, {1})));
  EXPECT_DOUBLE_EQ(z.value()[0], 6.0);
}

TEST(Ops, LinearShapeMismatch) {
  Tape t;
  EXPECT_THROW(linear(t.constant(Tensor({1, 3})), t.constant(Tensor({2, 2})),
                      t.constant(Tensor({2}))),
               DimensionError);
}

TEST(Ops, Relu) {
  Tape t;
  EXPECT_EQ(relu(t.constant(Tensor({3}, {-1, 0, 2}))).value(), Tensor({3}, {0, 0, 2}));
  Tensor pos({3}, {0.5, 1, 4});
  EXPECT_EQ(relu(t.constant(pos)).value(), pos);
}

TEST(Ops, Softmax) {
  Tape t;
  auto a = softmax(t.constant(Tensor({1, 3}, {0, 0, 0})), 1.0).value();
  for (double v : a.values()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
  auto b = softmax(t.constant(Tensor({1, 2}, {1000, 0})), 1.0).value();
  EXPECT_NEAR(b[0], 1.0, 1e-12);
  EXPECT_NEAR(b[1], 0.0, 1e-12);
  auto c = softmax(t.constant(random_tensor({4, 9}, 3, -5, 5)), 0.3).value();
  for (std::size_t r = 0; r < 4; ++r) {
    double s = 0;
    for (std::size_t j = 0; j < 9; ++j) s += c.at(r, j);
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
}

TEST(Ops, FourierAtZero) {
  Tape t;
  const std::size_t bands = 6;
  for (std::size_t dim : {1u, 2u, 3u}) {
    auto f = fourier_features(t.constant(Tensor({1, dim})), bands).value();
    ASSERT_EQ(f.size(), fourier_width(dim, bands));
    for (std::size_t i = 0; i < dim; ++i) EXPECT_EQ(f[i], 0.0);
    for (std::size_t j = dim; j < f.size(); j += 2) {
      EXPECT_EQ(f[j], 0.0);
      EXPECT_EQ(f[j + 1], 1.0);
    }
  }
}

TEST(Backward, SumGivesOnes) {
  Tape t;
  Var x = t.leaf(random_tensor({2, 3}, 1), true);
  t.backward(sum(x));
  EXPECT_EQ(t.grad(x), Tensor::filled({2, 3}, 1.0));
}

TEST(Backward, ReluGrad) {
  Tape t;
  Var x = t.leaf(Tensor({2}, {-1, 2}), true);
  t.backward(sum(relu(x)));
  EXPECT_EQ(t.grad(x), Tensor({2}, {0, 1}));
}

TEST(Backward, TwiceIsAnError) {
  Tape t;
  Var x = t.leaf(Tensor({1}, {2}), true);
  Var y = square(x);
  t.backward(sum(y));
  EXPECT_THROW(t.backward(sum(y)), ContractError);
}

TEST(Backward, NonFiniteRejected) {
  Tape t;
  EXPECT_THROW(t.leaf(Tensor({1}, {std::nan("")})), NumericError);
}

TEST(GradCheck, ElementwiseOps) {
  const Tensor x = random_tensor({3, 4}, 5);
  EXPECT_LT(check_unary(x, [](Tape&, const Var& v) { return sum(exp(v)); }), 1e-6);
  EXPECT_LT(check_unary(x, [](Tape&, const Var& v) { return sum(square(v)); }), 1e-6);
  EXPECT_LT(check_unary(x, [](Tape&, const Var& v) { return mean(mul(v, v)); }), 1e-6);
  EXPECT_LT(check_unary(x, [](Tape&, const Var& v) { return sum(square(softmax(v, 0.7))); }),
            1e-6);
  EXPECT_LT(check_unary(x, [](Tape&, const Var& v) { return sum(row_l2_normalize(v)); }), 1e-6);
  EXPECT_LT(check_unary(x, [](Tape&, const Var& v) { return sum(row_norm(v)); }), 1e-6);
  EXPECT_LT(check_unary(x, [](Tape&, const Var& v) { return sum(square(center_rows(v))); }),
            1e-6);
  EXPECT_LT(check_unary(x, [](Tape&, const Var& v) {
              return sum(square(fourier_features(slice_cols(v, 0, 2), 3)));
            }),
            1e-6);
}

TEST(GradCheck, MatrixOps) {
  ParameterStore store;
  store.add("a", random_tensor({3, 4}, 1));
  store.add("w", random_tensor({4, 5}, 2));
  store.add("b", random_tensor({5}, 3));
  auto r = finite_diff_check(
      [](Tape&, ParamBinding& p) {
        Var y = linear(p("a"), p("w"), p("b"));
        Var z = matmul(transpose(y), y);
        return sum(square(z));
      },
      store, 1e-6);
  EXPECT_LT(r.max_relative_error, 1e-6) << r.worst_parameter;
}

TEST(GradCheck, GraphAttention) {
  ParameterStore store;
  store.add("q", random_tensor({3, 8}, 4));
  store.add("k", random_tensor({5, 8}, 5));
  store.add("v", random_tensor({5, 8}, 6));
  const std::vector<std::vector<std::size_t>> nb{{0, 1, 2}, {2, 3, 4}, {4, 0, 1}};
  auto r = finite_diff_check(
      [&](Tape&, ParamBinding& p) {
        return sum(square(graph_attention(p("q"), p("k"), p("v"), nb, 0.35)));
      },
      store, 1e-6);
  EXPECT_LT(r.max_relative_error, 1e-6) << r.worst_parameter;
}

TEST(GradCheck, ImageOps) {
  ParameterStore store;
  store.add("img", random_tensor({12, 14}, 7, 0, 1));
  store.add("w", random_tensor({2, 1, 3, 3}, 8));
  store.add("b", random_tensor({2}, 9));
  Tensor coords({20, 2});
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> ux(0.3, 12.7), uy(0.3, 10.7);
  for (std::size_t i = 0; i < 20; ++i) {
    coords[2 * i] = ux(rng);
    coords[2 * i + 1] = uy(rng);
  }
  auto r = finite_diff_check(
      [&](Tape& t, ParamBinding& p) {
        Var img = p("img");
        Var c = conv2d(reshape(img, {1, 12, 14}), p("w"), p("b"));
        Var s = bilinear_sample(img, t.constant(coords));
        return add(sum(square(c)), sum(square(s)));
      },
      store, 1e-6);
  EXPECT_LT(r.max_relative_error, 1e-5) << r.worst_parameter;
}

TEST(GradCheck, SsimAndL1) {
  ParameterStore store;
  store.add("a", random_tensor({10, 11}, 12, 0, 1));
  store.add("b", random_tensor({10, 11}, 13, 0, 1));
  const std::vector<bool> mask(110, true);
  auto r = finite_diff_check(
      [&](Tape&, ParamBinding& p) {
        return add(ssim_mean(p("a"), p("b"), mask, 7), masked_l1_mean(p("a"), p("b"), mask));
      },
      store, 1e-6);
  EXPECT_LT(r.max_relative_error, 1e-5) << r.worst_parameter;
}

TEST(SoftArgmax, WindowAroundMaximum) {
  // 8x8 logits, one 8-px cell. Peak at (6,1): the radius-2 window is clipped
  // to x in [4,7], y in [0,3].
  Tensor l = random_tensor({8, 8}, 21, -1, 1);
  l[1 * 8 + 6] = 5.0;
  double z = 0, su = 0, sv = 0;
  for (int y = 0; y <= 3; ++y)
    for (int x = 4; x <= 7; ++x) {
      const double p = std::exp(l[y * 8 + x] / 0.5);
      z += p;
      su += p * x;
      sv += p * y;
    }
  Tape t;
  auto w = cell_soft_argmax(t.constant(l), 8, 0.5, 2).value();
  EXPECT_NEAR(w[0], su / z, 1e-12);
  EXPECT_NEAR(w[1], sv / z, 1e-12);
  // radius 0 is the whole cell
  double z2 = 0, su2 = 0;
  for (int i = 0; i < 64; ++i) {
    const double p = std::exp(l[i] / 0.5);
    z2 += p;
    su2 += p * (i % 8);
  }
  EXPECT_NEAR(cell_soft_argmax(t.constant(l), 8, 0.5, 0).value()[0], su2 / z2, 1e-12);
}

TEST(GradCheck, WindowedSoftArgmax) {
  Tensor l = random_tensor({8, 16}, 22, -2, 2);
  l[3 * 16 + 2] = 4.0;
  l[5 * 16 + 12] = 4.0;
  EXPECT_LT(check_unary(l, [](Tape&, const Var& v) {
              return sum(square(cell_soft_argmax(v, 8, 1.0, 2)));
            }),
            1e-6);
}

TEST(ParameterStore, ByteLayout) {
  ParameterStore s;
  s.add("ab", Tensor({2}, {1.5, -2.0}));
  const auto bytes = s.serialize();
  ASSERT_EQ(bytes.size(), 6u + 4 + 2 + 4 + 4 + 8);
  EXPECT_EQ(std::memcmp(bytes.data(), "SNDDW1", 6), 0);
  auto u32 = [&](std::size_t at) {
    return std::uint32_t(bytes[at]) | std::uint32_t(bytes[at + 1]) << 8 |
           std::uint32_t(bytes[at + 2]) << 16 | std::uint32_t(bytes[at + 3]) << 24;
  };
  EXPECT_EQ(u32(6), 2u);
  EXPECT_EQ(bytes[10], 'a');
  EXPECT_EQ(bytes[11], 'b');
  EXPECT_EQ(u32(12), 1u);
  EXPECT_EQ(u32(16), 2u);
  EXPECT_EQ(u32(20), std::bit_cast<std::uint32_t>(1.5f));
  EXPECT_EQ(u32(24), std::bit_cast<std::uint32_t>(-2.0f));
}

TEST(ParameterStore, RoundTripAndValidation) {
  ParameterStore s;
  s.add("layer.w", Tensor({2, 3}, {1, 2, 3, 4, 5, 6}));
  s.add("layer.b", Tensor({3}, {0.25, 0.5, 0.75}));
  auto bytes = s.serialize();
  EXPECT_EQ(ParameterStore::deserialize(bytes), s);

  auto truncated = bytes;
  truncated.pop_back();
  EXPECT_THROW(ParameterStore::deserialize(truncated), FormatError);
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(ParameterStore::deserialize(bad), FormatError);

  const auto path = std::filesystem::temp_directory_path() / "sendd_roundtrip.snddw";
  s.save(path);
  EXPECT_EQ(ParameterStore::load(path), s);
  std::filesystem::remove(path);
}

TEST(ParameterStore, CountByModule) {
  ParameterStore s;
  s.add("det.conv1.w", Tensor({8, 1, 3, 3}));
  s.add("det.conv1.b", Tensor({8}));
  s.add("stereo.head.w", Tensor({64, 1}));
  EXPECT_EQ(s.total_count(), 72u + 8 + 64);
}
