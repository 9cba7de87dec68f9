// Copyright (c) 2026, The sendd-desk authors
// SPDX-License-Identifier: Apache-2.0

#include "sendd/graph/node_features.hpp"

#include "sendd/autodiff/ops.hpp"
#include "sendd/errors.hpp"

namespace sendd::graph {

using ad::Var;

Var positional_encode(ad::ParamBinding& p, const std::string& name, const Var& x,
                      std::size_t bands) {
  if (x.value().rank() != 2) throw DimensionError("positional_encode: expected [n,dim]");
  const std::size_t dim = x.shape()[1];
  if (dim < 1 || dim > 3)
    throw ParameterError("positional_encode: unsupported dimension " + std::to_string(dim));
  return ad::linear(ad::fourier_features(x, bands), p(name + ".w"), p(name + ".b"));
}

Var normalize_columns(const Var& u, double width) {
  const double h = width / 2.0;
  return ad::affine_cols(u, {1.0 / h}, {-1.0});
}

Var normalize_pixels(const Var& uv, double width, double height) {
  const double h = width / 2.0;
  return ad::affine_cols(uv, {1.0 / h, 1.0 / h}, {-1.0, -(height / 2.0) / h});
}

Var normalize_points(const Var& p, const model::ModelConfig& cfg) {
  const double s = 1.0 / cfg.position_scale_mm;
  return ad::affine_cols(p, {s, s, s}, {0.0, 0.0, -cfg.depth_ref_mm * s});
}

namespace {

Var gamma(ad::ParamBinding& p, const std::string& name, const Var& f) {
  return ad::relu(ad::linear(f, p(name + ".w"), p(name + ".b")));
}

}  // namespace

Var flow_node_features(ad::ParamBinding& p, const model::ModelConfig& cfg, const Var& p3d,
                       const Var& p3d_next, const Var& f, const Var& f_next) {
  if (p3d.shape() != p3d_next.shape() || p3d.value().rank() != 2 || p3d.shape()[1] != 3)
    throw DimensionError("flow_node_features: positions must be matching [N,3]");
  const std::size_t b = cfg.bands;
  const Var terms[] = {
      positional_encode(p, "flow.enc_p", normalize_points(p3d, cfg), b),
      positional_encode(p, "flow.enc_p2", normalize_points(p3d_next, cfg), b),
      gamma(p, "flow.gamma_d", f),
      gamma(p, "flow.gamma_e", f_next),
      positional_encode(p, "flow.enc_fdist", ad::row_norm(ad::sub(f, f_next)), b),
      positional_encode(p, "flow.enc_pdist",
                        ad::scale(ad::row_norm(ad::sub(p3d, p3d_next)), 1.0 / cfg.flow_scale_mm),
                        b),
  };
  return ad::add_n(terms);
}

Var stereo_node_features(ad::ParamBinding& p, const model::ModelConfig& cfg, const Var& pl,
                         const Var& pr, const Var& fl, const Var& fr, double width,
                         double max_disparity) {
  if (pl.shape() != pr.shape() || pl.value().rank() != 2 || pl.shape()[1] != 2)
    throw DimensionError("stereo_node_features: positions must be matching [M,2]");
  const std::size_t b = cfg.bands;
  const Var ul = ad::slice_cols(pl, 0, 1), ur = ad::slice_cols(pr, 0, 1);
  const Var terms[] = {
      positional_encode(p, "stereo.enc_u", normalize_columns(ul, width), b),
      positional_encode(p, "stereo.enc_u2", normalize_columns(ur, width), b),
      gamma(p, "stereo.gamma_d", fl),
      gamma(p, "stereo.gamma_e", fr),
      positional_encode(p, "stereo.enc_fdist", ad::row_norm(ad::sub(fl, fr)), b),
      positional_encode(p, "stereo.enc_udist",
                        ad::scale(ad::row_norm(ad::sub(ul, ur)), 1.0 / max_disparity), b),
  };
  return ad::add_n(terms);
}

}  // namespace sendd::graph
