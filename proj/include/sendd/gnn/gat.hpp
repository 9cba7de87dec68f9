// Copyright (c) 2026, The sendd-desk authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sendd/autodiff/parameters.hpp"
#include "sendd/graph/knn.hpp"
#include "sendd/model/model.hpp"

namespace sendd::gnn {

/// h_i + O(sum_j softmax_j((Q h_i . K h_j) / sqrt(c)) V h_j) over graph
/// neighbours j of i. Nodes without neighbours pass through unchanged.
ad::Var gat_layer(ad::ParamBinding& params, const std::string& prefix, const ad::Var& h,
                  const graph::KnnGraph& graph);

/// One gat layer per configured dilation, each over a k-NN graph rebuilt on
/// the same points [N,dim]. Needs at least max(2, k-1) nodes; smaller graphs
/// keep every available neighbour.
ad::Var refine(ad::ParamBinding& params, const std::string& stack, const ad::Var& h,
               std::span<const double> points, std::size_t dim, const model::ModelConfig& config);

/// Refined nodes with the interpolation layer's keys and values precomputed,
/// so each query costs one attention over its k-1 nearest nodes.
struct InterpolationNodes {
  ad::Var keys, values;
  std::vector<double> points;
  std::size_t dim = 0;

  std::size_t size() const { return dim ? points.size() / dim : 0; }
};

InterpolationNodes prepare_interpolation(ad::ParamBinding& params, const std::string& stack,
                                         const ad::Var& refined, std::vector<double> points,
                                         std::size_t dim);

/// Query-vertex output of the gat layer over each query's clique.
ad::Var interpolate(ad::ParamBinding& params, const std::string& stack,
                    const InterpolationNodes& nodes, const ad::Var& query_features,
                    std::span<const double> query_points, const model::ModelConfig& config);

/// Disparity in pixels [Q,1] for pixel queries [Q,2].
ad::Var interpolate_disparity(ad::ParamBinding& params, const model::ModelConfig& config,
                              const InterpolationNodes& nodes, const ad::Var& queries,
                              double width, double height, double max_disparity);

/// 3D flow in millimetres [Q,3] for backprojected queries [Q,3].
ad::Var interpolate_flow(ad::ParamBinding& params, const model::ModelConfig& config,
                         const InterpolationNodes& nodes, const ad::Var& queries);

}  // namespace sendd::gnn
