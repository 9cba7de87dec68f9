// Copyright (c) 2026, The sendd-desk authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <ostream>
#include <span>
#include <utility>
#include <vector>

namespace sendd::graph {

struct KnnGraph {
  std::size_t k = 0;
  std::size_t dilation = 1;  // after clamping
  std::vector<std::vector<std::size_t>> neighbors;
  std::vector<std::vector<double>> distances;     // Euclidean, parallel to neighbors
  std::vector<std::vector<std::size_t>> ranks;    // 1-based rank in the full ordering

  std::size_t size() const { return neighbors.size(); }
};

/// Dilation actually used for n nodes: the requested one while k*d <= n-1,
/// otherwise max(1, (n-1)/k) so the neighbourhood never runs past the last node.
std::size_t effective_dilation(std::size_t n, std::size_t k, std::size_t dilation);

/// Dilated k-NN over row-major points [n,dim]: ranks d, 2d, ..., kd of each
/// node's distance ordering (self excluded, ties to the lower index).
KnnGraph build_knn_graph(std::span<const double> points, std::size_t dim, std::size_t k,
                         std::size_t dilation);

/// Indices of the `count` nearest points to each query, nearest first.
std::vector<std::vector<std::size_t>> nearest_points(std::span<const double> queries,
                                                     std::span<const double> points,
                                                     std::size_t dim, std::size_t count);

/// Complete graph on the query (vertex 0) and its k-1 nearest nodes (1..k-1).
struct QueryClique {
  std::vector<std::size_t> nodes;
  std::vector<std::pair<std::size_t, std::size_t>> edges;  // undirected, i < j
};

QueryClique build_query_clique(std::span<const double> query, std::span<const double> points,
                               std::size_t dim, std::size_t k);

/// node,neighbor,rank,distance
void write_edges_csv(std::ostream& out, const KnnGraph& graph);

}  // namespace sendd::graph
