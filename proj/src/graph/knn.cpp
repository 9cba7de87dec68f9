// Copyright (c) 2026, The sendd-desk authors
// SPDX-License-Identifier: Apache-2.0

#include "sendd/graph/knn.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>

#include "sendd/errors.hpp"
#include "sendd/simd/kernels.hpp"

namespace sendd::graph {
namespace {

// Structure-of-arrays copy for the distance kernel.
std::vector<double> to_soa(std::span<const double> points, std::size_t n, std::size_t dim) {
  std::vector<double> soa(n * dim);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t d = 0; d < dim; ++d) soa[d * n + i] = points[i * dim + d];
  return soa;
}

// Indices ordered by (distance, index), truncated to `count`.
std::vector<std::size_t> ordered(const std::vector<double>& d2, std::size_t count,
                                 std::size_t exclude) {
  std::vector<std::size_t> idx;
  idx.reserve(d2.size());
  for (std::size_t j = 0; j < d2.size(); ++j)
    if (j != exclude) idx.push_back(j);
  count = std::min(count, idx.size());
  auto less = [&](std::size_t a, std::size_t b) {
    return d2[a] < d2[b] || (d2[a] == d2[b] && a < b);
  };
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(count), idx.end(),
                    less);
  idx.resize(count);
  return idx;
}

void check_points(std::span<const double> points, std::size_t dim) {
  if (dim == 0 || points.size() % dim)
    throw DimensionError("point buffer is not a whole number of rows");
}

}  // namespace

std::size_t effective_dilation(std::size_t n, std::size_t k, std::size_t dilation) {
  if (n < 2 || k * dilation <= n - 1) return dilation;
  return std::max<std::size_t>(1, (n - 1) / k);
}

KnnGraph build_knn_graph(std::span<const double> points, std::size_t dim, std::size_t k,
                         std::size_t dilation) {
  if (k < 1 || dilation < 1) throw ContractError("build_knn_graph: k and dilation must be >= 1");
  check_points(points, dim);
  const std::size_t n = points.size() / dim;
  if (n < 2) throw ContractError("build_knn_graph: need at least 2 nodes");
  KnnGraph g;
  g.k = k;
  g.dilation = effective_dilation(n, k, dilation);
  g.neighbors.resize(n);
  g.distances.resize(n);
  g.ranks.resize(n);
  const auto soa = to_soa(points, n, dim);
  const auto& kern = simd::kernels();
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) {
    kern.squared_distances(soa.data(), n, dim, points.data() + i * dim, d2.data());
    const auto order = ordered(d2, k * g.dilation, i);
    for (std::size_t r = g.dilation; r <= order.size(); r += g.dilation) {
      const std::size_t j = order[r - 1];
      g.neighbors[i].push_back(j);
      g.distances[i].push_back(std::sqrt(d2[j]));
      g.ranks[i].push_back(r);
    }
  }
  return g;
}

std::vector<std::vector<std::size_t>> nearest_points(std::span<const double> queries,
                                                     std::span<const double> points,
                                                     std::size_t dim, std::size_t count) {
  check_points(points, dim);
  check_points(queries, dim);
  const std::size_t n = points.size() / dim, q = queries.size() / dim;
  const auto soa = to_soa(points, n, dim);
  const auto& kern = simd::kernels();
  std::vector<double> d2(n);
  std::vector<std::vector<std::size_t>> out(q);
  for (std::size_t i = 0; i < q; ++i) {
    kern.squared_distances(soa.data(), n, dim, queries.data() + i * dim, d2.data());
    out[i] = ordered(d2, count, n);
  }
  return out;
}

QueryClique build_query_clique(std::span<const double> query, std::span<const double> points,
                               std::size_t dim, std::size_t k) {
  check_points(points, dim);
  if (query.size() != dim) throw DimensionError("build_query_clique: query dimension differs");
  if (k < 2) throw ContractError("build_query_clique: k must be >= 2");
  if (points.size() / dim < k - 1)
    throw ContractError("build_query_clique: fewer than k-1 nodes");
  QueryClique c;
  c.nodes = nearest_points(query, points, dim, k - 1).front();
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = a + 1; b < k; ++b) c.edges.emplace_back(a, b);
  return c;
}

void write_edges_csv(std::ostream& out, const KnnGraph& g) {
  out << "node,neighbor,rank,distance\n" << std::setprecision(9);
  for (std::size_t i = 0; i < g.size(); ++i)
    for (std::size_t s = 0; s < g.neighbors[i].size(); ++s)
      out << i << ',' << g.neighbors[i][s] << ',' << g.ranks[i][s] << ',' << g.distances[i][s]
          << '\n';
}

}  // namespace sendd::graph
