// Copyright (c) 2026, The sendd-desk authors
// SPDX-License-Identifier: Apache-2.0
//
// AVX2 variants. Only mul/add are used (no FMA) so each lane rounds exactly
// like the scalar reference.

#include "sendd/simd/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>
#define SENDD_HAVE_AVX2_BUILD 1
#else
#define SENDD_HAVE_AVX2_BUILD 0
#endif

namespace sendd::simd {

#if SENDD_HAVE_AVX2_BUILD
namespace {

void axpy(double s, const double* x, double* y, std::size_t n) {
  const __m256d vs = _mm256_set1_pd(s);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vy = _mm256_loadu_pd(y + i);
    const __m256d vx = _mm256_loadu_pd(x + i);
    _mm256_storeu_pd(y + i, _mm256_add_pd(vy, _mm256_mul_pd(vs, vx)));
  }
  for (; i < n; ++i) y[i] += s * x[i];
}

// Keeps a 16-wide strip of C in registers across the whole k loop.
void matmul_acc(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
                std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    double* crow = c + i * m;
    const double* arow = a + i * k;
    std::size_t j = 0;
    for (; j + 16 <= m; j += 16) {
      __m256d c0 = _mm256_loadu_pd(crow + j);
      __m256d c1 = _mm256_loadu_pd(crow + j + 4);
      __m256d c2 = _mm256_loadu_pd(crow + j + 8);
      __m256d c3 = _mm256_loadu_pd(crow + j + 12);
      for (std::size_t p = 0; p < k; ++p) {
        const __m256d s = _mm256_set1_pd(arow[p]);
        const double* brow = b + p * m + j;
        c0 = _mm256_add_pd(c0, _mm256_mul_pd(s, _mm256_loadu_pd(brow)));
        c1 = _mm256_add_pd(c1, _mm256_mul_pd(s, _mm256_loadu_pd(brow + 4)));
        c2 = _mm256_add_pd(c2, _mm256_mul_pd(s, _mm256_loadu_pd(brow + 8)));
        c3 = _mm256_add_pd(c3, _mm256_mul_pd(s, _mm256_loadu_pd(brow + 12)));
      }
      _mm256_storeu_pd(crow + j, c0);
      _mm256_storeu_pd(crow + j + 4, c1);
      _mm256_storeu_pd(crow + j + 8, c2);
      _mm256_storeu_pd(crow + j + 12, c3);
    }
    for (; j + 4 <= m; j += 4) {
      __m256d c0 = _mm256_loadu_pd(crow + j);
      for (std::size_t p = 0; p < k; ++p) {
        const __m256d s = _mm256_set1_pd(arow[p]);
        c0 = _mm256_add_pd(c0, _mm256_mul_pd(s, _mm256_loadu_pd(b + p * m + j)));
      }
      _mm256_storeu_pd(crow + j, c0);
    }
    for (; j < m; ++j) {
      double acc = crow[j];
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * b[p * m + j];
      crow[j] = acc;
    }
  }
}

void matmul_tn_acc(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
                   std::size_t m) {
  for (std::size_t p = 0; p < n; ++p) {
    const double* brow = b + p * m;
    for (std::size_t i = 0; i < k; ++i) axpy(a[p * k + i], brow, c + i * m, m);
  }
}

void squared_distances(const double* soa, std::size_t n, std::size_t dim, const double* query,
                       double* out) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t d = 0; d < dim; ++d) {
      const __m256d diff =
          _mm256_sub_pd(_mm256_loadu_pd(soa + d * n + i), _mm256_set1_pd(query[d]));
      acc = _mm256_add_pd(acc, _mm256_mul_pd(diff, diff));
    }
    _mm256_storeu_pd(out + i, acc);
  }
  for (; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      const double diff = soa[d * n + i] - query[d];
      acc += diff * diff;
    }
    out[i] = acc;
  }
}

void window_sum_row(const double* in, std::size_t n, std::size_t w, double* out) {
  std::size_t x = 0;
  for (; x + 4 <= n; x += 4) {
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t t = 0; t < w; ++t) acc = _mm256_add_pd(acc, _mm256_loadu_pd(in + x + t));
    _mm256_storeu_pd(out + x, acc);
  }
  for (; x < n; ++x) {
    double acc = 0.0;
    for (std::size_t t = 0; t < w; ++t) acc += in[x + t];
    out[x] = acc;
  }
}

void column_sum(const double* src, std::size_t stride, std::size_t rows, std::size_t n,
                double* out) {
  std::size_t x = 0;
  for (; x + 4 <= n; x += 4) {
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t r = 0; r < rows; ++r)
      acc = _mm256_add_pd(acc, _mm256_loadu_pd(src + r * stride + x));
    _mm256_storeu_pd(out + x, acc);
  }
  for (; x < n; ++x) {
    double acc = 0.0;
    for (std::size_t r = 0; r < rows; ++r) acc += src[r * stride + x];
    out[x] = acc;
  }
}

}  // namespace

const KernelTable& avx2_kernels() {
  static const KernelTable table{Isa::Avx2,         axpy,           matmul_acc, matmul_tn_acc,
                                 squared_distances, window_sum_row, column_sum};
  return table;
}

#else

const KernelTable& avx2_kernels() { return scalar_kernels(); }

#endif

}  // namespace sendd::simd
