// Copyright (c) 2026, The sendd-desk authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>

#include "sendd/autodiff/parameters.hpp"
#include "sendd/model/model.hpp"

namespace sendd::graph {

/// Fourier features of x [n,dim] (dim in 1..3) mapped by the learned linear
/// layer `name` to c channels.
ad::Var positional_encode(ad::ParamBinding& params, const std::string& name, const ad::Var& x,
                          std::size_t bands);

/// Column u -> (u - W/2) / (W/2).
ad::Var normalize_columns(const ad::Var& u, double width);
/// (u, v) -> ((u - W/2) / (W/2), (v - H/2) / (W/2)).
ad::Var normalize_pixels(const ad::Var& uv, double width, double height);
/// (x, y, z) mm -> (x, y, z - depth_ref) / position_scale.
ad::Var normalize_points(const ad::Var& p3d, const model::ModelConfig& config);

/// b = phi3(p) + phi3'(p') + gamma_d(f) + gamma_e(f') + phi1(|f - f'|) + phi1(|p - p'|),
/// each term with its own weights. Rows follow the input rows.
ad::Var flow_node_features(ad::ParamBinding& params, const model::ModelConfig& config,
                           const ad::Var& p3d, const ad::Var& p3d_next, const ad::Var& desc,
                           const ad::Var& desc_next);

/// a = phi1(u) + phi1'(u') + gamma_d(f) + gamma_e(f') + phi1(|f - f'|) + phi1(|u - u'|)
/// from left/right matched positions [M,2].
ad::Var stereo_node_features(ad::ParamBinding& params, const model::ModelConfig& config,
                             const ad::Var& pos_left, const ad::Var& pos_right,
                             const ad::Var& desc_left, const ad::Var& desc_right, double width,
                             double max_disparity);

}  // namespace sendd::graph
