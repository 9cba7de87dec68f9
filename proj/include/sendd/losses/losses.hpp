// Copyright (c) 2026, The sendd-desk authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <ostream>
#include <vector>

#include "sendd/autodiff/tape.hpp"
#include "sendd/geometry/image.hpp"

namespace sendd::losses {

struct LossWeights {
  double alpha = 0.85;
  double beta = 150.0;
  double lambda_d = 0.001;
  double lambda_F = 0.01;
  double lambda_D = 1.0;

  /// Throws ParameterError unless all weights are >= 0 and alpha is in [0,1].
  void validate() const;
};

inline constexpr std::size_t kSsimWindow = 7;

/// Mean SSIM of [H,W] images over 7x7 windows whose pixels are all valid.
ad::Var ssim(const ad::Var& a, const ad::Var& b, const std::vector<bool>& mask,
             std::size_t window = kSsimWindow);

/// alpha (1 - SSIM) / 2 + (1 - alpha) * masked mean |a - b|.
ad::Var photometric_loss(const ad::Var& a, const ad::Var& b, const std::vector<bool>& mask,
                         double alpha);

/// Per-pixel weights exp(-(beta / C) sum_c |dI/dx|) and the same for y, using
/// forward differences (last column / row unused).
struct EdgeWeights {
  std::vector<double> wx, wy;
};
EdgeWeights edge_weights(const geometry::Image& img, double beta);

/// Mean edge-weighted L1 of the forward differences of v ([H,W] or [H,W,C]).
ad::Var smoothness_loss(const ad::Var& v, const EdgeWeights& weights);

/// Masked mean |warped - depth| in millimetres.
ad::Var depth_match_loss(const ad::Var& warped, const ad::Var& depth,
                         const std::vector<bool>& mask);

struct LossTerms {
  ad::Var lp_stereo, lp_flow, ls_flow, ls_disp, l_d;
};

/// lp_stereo + lp_flow + lambda_F ls_flow + lambda_D ls_disp + lambda_d l_d.
ad::Var total_loss(const LossTerms& terms, const LossWeights& weights);
double total_loss(double lp_stereo, double lp_flow, double ls_flow, double ls_disp, double l_d,
                  const LossWeights& weights);

/// Image-level helpers evaluated on a private tape. Multi-channel inputs are
/// averaged over channels. An empty mask means every pixel is valid.
double ssim(const geometry::Image& a, const geometry::Image& b,
            const std::vector<bool>& mask = {});
double photometric_loss(const geometry::Image& a, const geometry::Image& b,
                        const std::vector<bool>& mask, double alpha);
double smoothness_loss(const geometry::FlowImage& v, const geometry::Image& img, double beta);
double depth_match_loss(const geometry::DepthMap& warped, const geometry::DepthMap& depth);

struct LossLogRow {
  long step = 0;
  double lp_stereo = 0, lp_flow = 0, ls_flow = 0, ls_disp = 0, l_d = 0, total = 0, lr = 0;
};
void write_loss_log_header(std::ostream& out);
void write_loss_log_row(std::ostream& out, const LossLogRow& row);

}  // namespace sendd::losses
