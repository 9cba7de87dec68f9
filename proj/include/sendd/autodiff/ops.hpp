// Copyright (c) 2026, The sendd-desk authors
// SPDX-License-Identifier: Apache-2.0
//
// Differentiable primitives. All inputs of one call must live on the same tape.
// Shape mismatches throw DimensionError; bad hyperparameters ParameterError.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sendd/autodiff/tape.hpp"

namespace sendd::ad {

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
/// x[n,m] + v[m] broadcast over rows.
Var add_rowvec(const Var& x, const Var& v);
/// Sum of any number of same-shape tensors, in argument order.
Var add_n(std::span<const Var> terms);

Var sum(const Var& a);
Var mean(const Var& a);

/// max(0, x); the subgradient at exactly 0 is 0.
Var relu(const Var& a);
Var exp(const Var& a);
Var square(const Var& a);

/// y = x W + b with x[n,in], W[in,out], b[out].
Var linear(const Var& x, const Var& w, const Var& b);
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);

/// Softmax of x / temperature along the last axis (each row of a matrix, or a
/// whole vector), stabilised by max subtraction.
Var softmax(const Var& x, double temperature);

Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
Var gather_rows(const Var& x, std::span<const std::size_t> rows);
Var slice_cols(const Var& x, std::size_t begin, std::size_t count);
Var reshape(const Var& x, Shape shape);

/// Each row divided by its L2 norm (rows of norm 0 are left at 0).
Var row_l2_normalize(const Var& x);
/// [n,m] -> [n,1] row L2 norms; subgradient 0 at the origin.
Var row_norm(const Var& x);
/// Subtracts the mean of each row.
Var center_rows(const Var& x);

/// Raw coordinates followed by sin/cos(2^j * pi * x_i) for j < bands, per
/// coordinate i: [n,dim] -> [n, dim * (1 + 2 * bands)].
Var fourier_features(const Var& x, std::size_t bands);
std::size_t fourier_width(std::size_t dim, std::size_t bands);

/// Rows of queries attend over listed rows of keys/values:
/// out[r] = sum_j softmax_j(scale * q_r . k_j) v_j, j in neighbors[r].
/// Rows with no neighbours produce zeros.
Var graph_attention(const Var& queries, const Var& keys, const Var& values,
                    const std::vector<std::vector<std::size_t>>& neighbors, double scale);

/// numerator / max(x, floor), elementwise. Gradient vanishes where x < floor.
Var guarded_reciprocal(const Var& x, double numerator, double floor);

/// y[r,c] = x[r,c] * scale[c] + shift[c] with constant coefficients.
Var affine_cols(const Var& x, std::vector<double> scale, std::vector<double> shift);
/// y[r,c] = x[r,c] * s[r].
Var scale_rows(const Var& x, const Var& s);

}  // namespace sendd::ad
