// Copyright (c) 2026, The sendd-desk authors
// SPDX-License-Identifier: Apache-2.0
//
// Data-parallel inner loops with a scalar reference and an AVX2 variant.
//
// Every kernel is lane-parallel over independent outputs and accumulates each
// output in the same order as the scalar loop, without fused multiply-add.
// The variants are therefore bit-identical, which the equivalence tests check.

#pragma once

#include <cstddef>
#include <string_view>

namespace sendd::simd {

enum class Isa { Scalar, Avx2 };

struct KernelTable {
  Isa isa;
  /// y[i] += s * x[i]
  void (*axpy)(double s, const double* x, double* y, std::size_t n);
  /// c[n,m] += a[n,k] * b[k,m], all row-major.
  void (*matmul_acc)(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
                     std::size_t m);
  /// c[k,m] += a[n,k]^T * b[n,m]
  void (*matmul_tn_acc)(const double* a, const double* b, double* c, std::size_t n,
                        std::size_t k, std::size_t m);
  /// out[i] = sum_d (soa[d*n + i] - query[d])^2, dimensions summed in order.
  void (*squared_distances)(const double* soa, std::size_t n, std::size_t dim,
                            const double* query, double* out);
  /// out[x] = sum_{t<w} in[x+t] for x in [0, n).
  void (*window_sum_row)(const double* in, std::size_t n, std::size_t w, double* out);
  /// out[x] = sum_{r<rows} src[r*stride + x] for x in [0, n).
  void (*column_sum)(const double* src, std::size_t stride, std::size_t rows, std::size_t n,
                     double* out);
};

const KernelTable& scalar_kernels();
const KernelTable& avx2_kernels();

bool isa_available(Isa isa);

/// Kernels selected at first use: AVX2 when the CPU has it, unless the
/// environment variable SENDD_SIMD=scalar forces the reference path.
const KernelTable& kernels();

/// Overrides the runtime choice (tests, benchmarks). Throws if unavailable.
void force_isa(Isa isa);
Isa active_isa();
std::string_view isa_name(Isa isa);

}  // namespace sendd::simd
