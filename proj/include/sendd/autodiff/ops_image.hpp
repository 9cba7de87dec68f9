// Copyright (c) 2026, The sendd-desk authors
// SPDX-License-Identifier: Apache-2.0
//
// Differentiable image-domain primitives: convolution, per-cell soft-argmax,
// bilinear sampling, grid upsampling and the fused photometric/smoothness terms.

#pragma once

#include <cstddef>
#include <vector>

#include "sendd/autodiff/tape.hpp"

namespace sendd::ad {

/// Same-padded (zero) stride-1 correlation. x[Cin,H,W], w[Cout,Cin,K,K], b[Cout].
Var conv2d(const Var& x, const Var& w, const Var& b);

/// logits[H,W] split into cell x cell tiles in row-major tile order. Returns
/// [tiles,2] expected (u,v) under softmax(logits / temperature) per tile.
/// radius > 0 restricts the softmax to the (2r+1)^2 window around the tile
/// maximum (clipped to the tile); 0 uses the whole tile.
Var cell_soft_argmax(const Var& logits, std::size_t cell, double temperature,
                     std::size_t radius = 0);

/// Bilinear samples of src[H,W] (or [H,W,C]) at coords[P,2] given as (x,y) in
/// pixel units. Returns [P] (or [P,C]). Samples outside [0,W-1]x[0,H-1] are 0
/// and flagged false in `valid`. Differentiable in both src and coords.
Var bilinear_sample(const Var& src, const Var& coords, std::vector<bool>* valid = nullptr);

/// Bilinear upsampling of a grid[h,w] or [h,w,C] whose sample (i,j) sits at
/// pixel (offset + stride*j, offset + stride*i), to a full [H,W] (or [H,W,C])
/// image, clamping at the border.
Var upsample_grid(const Var& grid, std::size_t height, std::size_t width, double stride,
                  double offset);

/// Mean SSIM of a[H,W], b[H,W] over window x window uniform windows, averaged
/// over windows fully inside the image whose pixels all have mask true.
/// C1 = 0.01^2, C2 = 0.03^2. Throws ContractError if no window qualifies.
Var ssim_mean(const Var& a, const Var& b, const std::vector<bool>& mask, std::size_t window);

/// Mean |a - b| over mask-true entries (all channels of a masked pixel).
Var masked_l1_mean(const Var& a, const Var& b, const std::vector<bool>& mask);

/// Edge-aware smoothness of v[h,w] or [h,w,C]: mean over interior samples of
/// wx*|dv/dx| + wy*|dv/dy| (forward differences, summed over channels).
/// wx, wy are [h,w] constant weights; the last column/row is dropped.
Var edge_aware_smoothness(const Var& v, const std::vector<double>& wx,
                          const std::vector<double>& wy);

}  // namespace sendd::ad
