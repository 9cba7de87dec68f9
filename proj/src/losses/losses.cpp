// Copyright (c) 2026, The sendd-desk authors
// SPDX-License-Identifier: Apache-2.0

#include "sendd/losses/losses.hpp"

#include <cmath>
#include <iomanip>

#include "sendd/autodiff/ops.hpp"
#include "sendd/autodiff/ops_image.hpp"
#include "sendd/errors.hpp"

namespace sendd::losses {

using ad::Tensor;
using ad::Var;

void LossWeights::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ParameterError("alpha must lie in [0,1]");
  if (!(beta >= 0.0 && lambda_d >= 0.0 && lambda_F >= 0.0 && lambda_D >= 0.0))
    throw ParameterError("loss weights must be non-negative");
}

Var ssim(const Var& a, const Var& b, const std::vector<bool>& mask, std::size_t window) {
  return ad::ssim_mean(a, b, mask, window);
}

Var photometric_loss(const Var& a, const Var& b, const std::vector<bool>& mask, double alpha) {
  if (a.shape() != b.shape()) throw DimensionError("photometric_loss: image shapes differ");
  bool any = false;
  for (bool m : mask) any = any || m;
  if (!any) throw ContractError("photometric_loss: empty mask");
  Var dssim = ad::scale(ad::add_scalar(ad::scale(ssim(a, b, mask), -1.0), 1.0), alpha / 2.0);
  Var l1 = ad::scale(ad::masked_l1_mean(a, b, mask), 1.0 - alpha);
  return ad::add(dssim, l1);
}

EdgeWeights edge_weights(const geometry::Image& img, double beta) {
  const int w = img.width, h = img.height, c = img.channels;
  EdgeWeights e;
  e.wx.assign(static_cast<std::size_t>(w) * h, 1.0);
  e.wy.assign(static_cast<std::size_t>(w) * h, 1.0);
  const double k = beta / static_cast<double>(c);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double gx = 0.0, gy = 0.0;
      for (int ch = 0; ch < c; ++ch) {
        if (x + 1 < w) gx += std::abs(img.at(x + 1, y, ch) - img.at(x, y, ch));
        if (y + 1 < h) gy += std::abs(img.at(x, y + 1, ch) - img.at(x, y, ch));
      }
      e.wx[static_cast<std::size_t>(y) * w + x] = std::exp(-k * gx);
      e.wy[static_cast<std::size_t>(y) * w + x] = std::exp(-k * gy);
    }
  }
  return e;
}

Var smoothness_loss(const Var& v, const EdgeWeights& w) {
  return ad::edge_aware_smoothness(v, w.wx, w.wy);
}

Var depth_match_loss(const Var& warped, const Var& depth, const std::vector<bool>& mask) {
  if (warped.size() != depth.size()) throw DimensionError("depth_match_loss: sizes differ");
  Var a = warped.shape() == depth.shape() ? warped : ad::reshape(warped, depth.shape());
  bool any = false;
  for (bool m : mask) any = any || m;
  if (!any) throw ContractError("depth_match_loss: no jointly valid pixels");
  return ad::masked_l1_mean(a, depth, mask);
}

Var total_loss(const LossTerms& t, const LossWeights& w) {
  const Var terms[] = {t.lp_stereo, t.lp_flow, ad::scale(t.ls_flow, w.lambda_F),
                       ad::scale(t.ls_disp, w.lambda_D), ad::scale(t.l_d, w.lambda_d)};
  return ad::add_n(terms);
}

double total_loss(double lp_stereo, double lp_flow, double ls_flow, double ls_disp, double l_d,
                  const LossWeights& w) {
  return lp_stereo + lp_flow + w.lambda_F * ls_flow + w.lambda_D * ls_disp + w.lambda_d * l_d;
}

namespace {

Tensor channel_tensor(const geometry::Image& img, int ch) {
  Tensor t({static_cast<std::size_t>(img.height), static_cast<std::size_t>(img.width)});
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) t[static_cast<std::size_t>(y) * img.width + x] = img.at(x, y, ch);
  return t;
}

std::vector<bool> full_mask(const geometry::Image& img, const std::vector<bool>& mask) {
  if (mask.empty()) return std::vector<bool>(static_cast<std::size_t>(img.width) * img.height, true);
  if (mask.size() != static_cast<std::size_t>(img.width) * img.height)
    throw DimensionError("mask size differs from image");
  return mask;
}

void require_same(const geometry::Image& a, const geometry::Image& b) {
  if (!a.same_size(b) || a.channels != b.channels) throw DimensionError("image shapes differ");
}

}  // namespace

double ssim(const geometry::Image& a, const geometry::Image& b, const std::vector<bool>& mask) {
  require_same(a, b);
  const auto m = full_mask(a, mask);
  double s = 0.0;
  for (int ch = 0; ch < a.channels; ++ch) {
    ad::Tape tape;
    s += ssim(tape.constant(channel_tensor(a, ch)), tape.constant(channel_tensor(b, ch)), m).item();
  }
  return s / a.channels;
}

double photometric_loss(const geometry::Image& a, const geometry::Image& b,
                        const std::vector<bool>& mask, double alpha) {
  require_same(a, b);
  const auto m = full_mask(a, mask);
  double s = 0.0;
  for (int ch = 0; ch < a.channels; ++ch) {
    ad::Tape tape;
    s += photometric_loss(tape.constant(channel_tensor(a, ch)),
                          tape.constant(channel_tensor(b, ch)), m, alpha)
             .item();
  }
  return s / a.channels;
}

double smoothness_loss(const geometry::FlowImage& v, const geometry::Image& img, double beta) {
  if (v.width != img.width || v.height != img.height)
    throw DimensionError("smoothness_loss: field and image grids differ");
  ad::Tape tape;
  Tensor t({static_cast<std::size_t>(v.height), static_cast<std::size_t>(v.width),
            static_cast<std::size_t>(v.channels)},
           v.data);
  return smoothness_loss(tape.constant(std::move(t)), edge_weights(img, beta)).item();
}

double depth_match_loss(const geometry::DepthMap& warped, const geometry::DepthMap& depth) {
  if (warped.width != depth.width || warped.height != depth.height ||
      warped.channels != depth.channels)
    throw DimensionError("depth_match_loss: grids differ");
  const std::size_t n = static_cast<std::size_t>(depth.width) * depth.height;
  std::vector<bool> mask(n, true);
  for (std::size_t i = 0; i < n; ++i) {
    if (!warped.valid.empty() && !warped.valid[i]) mask[i] = false;
    if (!depth.valid.empty() && !depth.valid[i]) mask[i] = false;
  }
  ad::Tape tape;
  const ad::Shape s{n, static_cast<std::size_t>(depth.channels)};
  return depth_match_loss(tape.constant(Tensor(s, warped.data)), tape.constant(Tensor(s, depth.data)),
                          mask)
      .item();
}

void write_loss_log_header(std::ostream& out) {
  out << "step,L_p_stereo,L_p_flow,L_s_F,L_s_D,L_d,total,lr\n";
}

void write_loss_log_row(std::ostream& out, const LossLogRow& r) {
  out << r.step << std::setprecision(9) << ',' << r.lp_stereo << ',' << r.lp_flow << ','
      << r.ls_flow << ',' << r.ls_disp << ',' << r.l_d << ',' << r.total << ',' << r.lr << '\n';
}

}  // namespace sendd::losses
