// Copyright (c) 2026, The sendd-desk authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "sendd/simd/kernels.hpp"

using namespace sendd::simd;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

class Avx2Equivalence : public ::testing::Test {
 protected:
  void SetUp() override {
    if (!isa_available(Isa::Avx2)) GTEST_SKIP() << "no AVX2 on this host";
  }
  const KernelTable& s = scalar_kernels();
  const KernelTable& v = avx2_kernels();
  std::mt19937_64 rng{11};
};

}  // namespace

TEST_F(Avx2Equivalence, Axpy) {
  for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 64u, 1001u}) {
    auto x = random_vec(n, rng), y = random_vec(n, rng);
    auto y2 = y;
    s.axpy(0.37, x.data(), y.data(), n);
    v.axpy(0.37, x.data(), y2.data(), n);
    EXPECT_EQ(y, y2) << n;
  }
}

TEST_F(Avx2Equivalence, MatmulAcc) {
  for (auto [n, k, m] : {std::tuple{1u, 1u, 1u}, {5u, 7u, 3u}, {16u, 64u, 64u}, {9u, 33u, 13u}}) {
    auto a = random_vec(n * k, rng), b = random_vec(k * m, rng), c = random_vec(n * m, rng);
    auto c2 = c;
    s.matmul_acc(a.data(), b.data(), c.data(), n, k, m);
    v.matmul_acc(a.data(), b.data(), c2.data(), n, k, m);
    EXPECT_EQ(c, c2);
  }
}

TEST_F(Avx2Equivalence, MatmulTnAcc) {
  for (auto [n, k, m] : {std::tuple{1u, 1u, 1u}, {5u, 7u, 3u}, {40u, 64u, 64u}, {9u, 33u, 13u}}) {
    auto a = random_vec(n * k, rng), b = random_vec(n * m, rng), c = random_vec(k * m, rng);
    auto c2 = c;
    s.matmul_tn_acc(a.data(), b.data(), c.data(), n, k, m);
    v.matmul_tn_acc(a.data(), b.data(), c2.data(), n, k, m);
    EXPECT_EQ(c, c2);
  }
}

TEST_F(Avx2Equivalence, SquaredDistances) {
  for (std::size_t dim : {1u, 2u, 3u})
    for (std::size_t n : {1u, 5u, 8u, 199u}) {
      auto soa = random_vec(n * dim, rng), q = random_vec(dim, rng);
      std::vector<double> o1(n), o2(n);
      s.squared_distances(soa.data(), n, dim, q.data(), o1.data());
      v.squared_distances(soa.data(), n, dim, q.data(), o2.data());
      EXPECT_EQ(o1, o2);
    }
}

TEST_F(Avx2Equivalence, WindowSumRow) {
  for (std::size_t n : {1u, 6u, 26u, 250u})
    for (std::size_t w : {1u, 7u}) {
      auto in = random_vec(n + w - 1, rng);
      std::vector<double> o1(n), o2(n);
      s.window_sum_row(in.data(), n, w, o1.data());
      v.window_sum_row(in.data(), n, w, o2.data());
      EXPECT_EQ(o1, o2);
    }
}

TEST_F(Avx2Equivalence, ColumnSum) {
  for (std::size_t n : {1u, 5u, 250u}) {
    const std::size_t stride = n + 3, rows = 7;
    auto src = random_vec(stride * rows, rng);
    std::vector<double> o1(n), o2(n);
    s.column_sum(src.data(), stride, rows, n, o1.data());
    v.column_sum(src.data(), stride, rows, n, o2.data());
    EXPECT_EQ(o1, o2);
  }
}

TEST(Dispatch, ForceScalar) {
  const Isa before = active_isa();
  force_isa(Isa::Scalar);
  EXPECT_EQ(kernels().isa, Isa::Scalar);
  EXPECT_EQ(isa_name(Isa::Scalar), "scalar");
  force_isa(before);
}

TEST(Kernels, ScalarReference) {
  const auto& s = scalar_kernels();
  std::vector<double> a{1, 2, 3, 4}, b{5, 6, 7, 8}, c(4, 0.0);
  s.matmul_acc(a.data(), b.data(), c.data(), 2, 2, 2);
  EXPECT_EQ(c, (std::vector<double>{19, 22, 43, 50}));
  std::vector<double> in{1, 2, 3, 4, 5}, out(3);
  s.window_sum_row(in.data(), 3, 3, out.data());
  EXPECT_EQ(out, (std::vector<double>{6, 9, 12}));
}
