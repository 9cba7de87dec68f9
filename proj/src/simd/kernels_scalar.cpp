// Copyright (c) 2026, The sendd-desk authors
// SPDX-License-Identifier: Apache-2.0

#include "sendd/simd/kernels.hpp"

namespace sendd::simd {
namespace {

void axpy(double s, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += s * x[i];
}

void matmul_acc(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
                std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    double* crow = c + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double s = a[i * k + p];
      const double* brow = b + p * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += s * brow[j];
    }
  }
}

void matmul_tn_acc(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
                   std::size_t m) {
  for (std::size_t p = 0; p < n; ++p) {
    const double* brow = b + p * m;
    for (std::size_t i = 0; i < k; ++i) {
      const double s = a[p * k + i];
      double* crow = c + i * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += s * brow[j];
    }
  }
}

void squared_distances(const double* soa, std::size_t n, std::size_t dim, const double* query,
                       double* out) {
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      const double diff = soa[d * n + i] - query[d];
      acc += diff * diff;
    }
    out[i] = acc;
  }
}

void window_sum_row(const double* in, std::size_t n, std::size_t w, double* out) {
  for (std::size_t x = 0; x < n; ++x) {
    double acc = 0.0;
    for (std::size_t t = 0; t < w; ++t) acc += in[x + t];
    out[x] = acc;
  }
}

void column_sum(const double* src, std::size_t stride, std::size_t rows, std::size_t n,
                double* out) {
  for (std::size_t x = 0; x < n; ++x) {
    double acc = 0.0;
    for (std::size_t r = 0; r < rows; ++r) acc += src[r * stride + x];
    out[x] = acc;
  }
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{Isa::Scalar,       axpy,           matmul_acc, matmul_tn_acc,
                                 squared_distances, window_sum_row, column_sum};
  return table;
}

}  // namespace sendd::simd
