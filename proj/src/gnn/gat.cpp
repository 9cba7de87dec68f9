// Copyright (c) 2026, The sendd-desk authors
// SPDX-License-Identifier: Apache-2.0

#include "sendd/gnn/gat.hpp"

#include <algorithm>
#include <cmath>

#include "sendd/autodiff/ops.hpp"
#include "sendd/errors.hpp"
#include "sendd/graph/node_features.hpp"

namespace sendd::gnn {

using ad::Var;

namespace {

Var lin(ad::ParamBinding& p, const std::string& name, const Var& x) {
  return ad::linear(x, p(name + ".w"), p(name + ".b"));
}

Var keys(ad::ParamBinding& p, const std::string& name, const Var& x) {
  return ad::matmul(x, p(name + ".w"));
}

double attention_scale(const Var& h) { return 1.0 / std::sqrt(static_cast<double>(h.shape()[1])); }

}  // namespace

Var gat_layer(ad::ParamBinding& p, const std::string& prefix, const Var& h,
              const graph::KnnGraph& g) {
  if (h.value().rank() != 2 || h.shape()[0] != g.size())
    throw DimensionError("gat_layer: feature rows differ from graph size");
  Var att = ad::graph_attention(lin(p, prefix + ".q", h), keys(p, prefix + ".k", h),
                                lin(p, prefix + ".v", h), g.neighbors, attention_scale(h));
  return ad::add(h, lin(p, prefix + ".o", att));
}

Var refine(ad::ParamBinding& p, const std::string& stack, const Var& h,
           std::span<const double> points, std::size_t dim, const model::ModelConfig& cfg) {
  const std::size_t n = h.value().rank() == 2 ? h.shape()[0] : 0;
  if (n * dim != points.size()) throw DimensionError("refine: points do not match features");
  const std::size_t need = std::max<std::size_t>(2, cfg.k - 1);
  if (n < need)
    throw ContractError("refine: " + std::to_string(n) + " nodes, need at least " +
                        std::to_string(need));
  Var x = h;
  for (std::size_t l = 0; l < cfg.dilations.size(); ++l) {
    const auto g = graph::build_knn_graph(points, dim, cfg.k, cfg.dilations[l]);
    x = gat_layer(p, stack + ".gat" + std::to_string(l), x, g);
  }
  return x;
}

InterpolationNodes prepare_interpolation(ad::ParamBinding& p, const std::string& stack,
                                         const Var& refined, std::vector<double> points,
                                         std::size_t dim) {
  InterpolationNodes nodes;
  nodes.keys = keys(p, stack + ".interp.k", refined);
  nodes.values = lin(p, stack + ".interp.v", refined);
  nodes.points = std::move(points);
  nodes.dim = dim;
  if (nodes.size() != refined.shape()[0])
    throw DimensionError("prepare_interpolation: points do not match features");
  return nodes;
}

Var interpolate(ad::ParamBinding& p, const std::string& stack, const InterpolationNodes& nodes,
                const Var& qf, std::span<const double> qpts, const model::ModelConfig& cfg) {
  if (nodes.size() + 1 < cfg.k)
    throw ContractError("interpolate: fewer than k-1 nodes");
  // Only the query vertex is read out, and in a single layer its update depends
  // on the clique's other vertices alone.
  const auto cliques = graph::nearest_points(qpts, nodes.points, nodes.dim, cfg.k - 1);
  Var att = ad::graph_attention(lin(p, stack + ".interp.q", qf), nodes.keys, nodes.values,
                                cliques, attention_scale(qf));
  return ad::add(qf, lin(p, stack + ".interp.o", att));
}

Var interpolate_disparity(ad::ParamBinding& p, const model::ModelConfig& cfg,
                          const InterpolationNodes& nodes, const Var& q, double width,
                          double height, double max_disparity) {
  Var qf = graph::positional_encode(p, "stereo.query", graph::normalize_pixels(q, width, height),
                                    cfg.bands);
  const auto& qv = q.value();
  Var h = interpolate(p, "stereo", nodes, qf, qv.values(), cfg);
  return ad::scale(lin(p, "stereo.head", h), max_disparity);
}

Var interpolate_flow(ad::ParamBinding& p, const model::ModelConfig& cfg,
                     const InterpolationNodes& nodes, const Var& q) {
  Var qf = graph::positional_encode(p, "flow.query", graph::normalize_points(q, cfg), cfg.bands);
  const auto& qv = q.value();
  Var h = interpolate(p, "flow", nodes, qf, qv.values(), cfg);
  return ad::scale(lin(p, "flow.head", h), cfg.flow_scale_mm);
}

}  // namespace sendd::gnn
