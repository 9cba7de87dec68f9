// Copyright (c) 2026, The sendd-desk authors
// SPDX-License-Identifier: Apache-2.0

#include "sendd/detect/matching.hpp"

#include <cmath>
#include <functional>
#include <limits>

#include "sendd/autodiff/ops.hpp"
#include "sendd/errors.hpp"

namespace sendd::detect {
namespace {

using ad::Tensor;
using ad::Var;

using Candidate = std::function<bool(std::size_t i, std::size_t j)>;

double descriptor_distance(const Tensor& a, std::size_t i, const Tensor& b, std::size_t j,
                           std::size_t c) {
  double s = 0.0;
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double d = a[i * c + ch] - b[j * c + ch];
    s += d * d;
  }
  return s;
}

MatchSet match_impl(const KeypointSet& a, const KeypointSet& b, const Candidate& allowed,
                    const MatchOptions& opt) {
  MatchSet m;
  const std::size_t na = a.size(), nb = b.size();
  if (na == 0 || nb == 0) return m;
  if (!a.descriptors.valid() || !b.descriptors.valid())
    throw ContractError("matching requires described keypoints");
  const std::size_t c = a.descriptors.shape()[1];
  if (b.descriptors.shape()[1] != c) throw DimensionError("matching: descriptor widths differ");
  const auto& da = a.descriptors.value();
  const auto& db = b.descriptors.value();

  std::vector<double> dist(na * nb, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < na; ++i)
    for (std::size_t j = 0; j < nb; ++j)
      if (allowed(i, j)) dist[i * nb + j] = descriptor_distance(da, i, db, j, c);

  auto best_in_b = [&](std::size_t i) {
    std::size_t best = nb;
    for (std::size_t j = 0; j < nb; ++j)
      if (std::isfinite(dist[i * nb + j]) && (best == nb || dist[i * nb + j] < dist[i * nb + best]))
        best = j;
    return best;
  };
  auto best_in_a = [&](std::size_t j) {
    std::size_t best = na;
    for (std::size_t i = 0; i < na; ++i)
      if (std::isfinite(dist[i * nb + j]) && (best == na || dist[i * nb + j] < dist[best * nb + j]))
        best = i;
    return best;
  };

  for (std::size_t i = 0; i < na; ++i) {
    const std::size_t j = best_in_b(i);
    if (j == nb) continue;
    if (opt.mutual && best_in_a(j) != i) continue;
    m.pairs.emplace_back(i, j);
  }
  if (m.pairs.empty()) return m;

  std::vector<std::size_t> ia, jb;
  for (auto [i, j] : m.pairs) {
    ia.push_back(i);
    jb.push_back(j);
  }
  m.pos_a = ad::gather_rows(a.positions, ia);
  m.desc_a = ad::gather_rows(a.descriptors, ia);
  if (opt.mode == Mode::Infer) {
    m.pos_b = ad::gather_rows(b.positions, jb);
    m.desc_b = ad::gather_rows(b.descriptors, jb);
    return m;
  }
  // Soft match: softmax over descriptor dot products restricted to candidates.
  auto& tape = *a.descriptors.tape();
  Tensor mask({ia.size(), nb});
  for (std::size_t r = 0; r < ia.size(); ++r)
    for (std::size_t j = 0; j < nb; ++j)
      mask[r * nb + j] = std::isfinite(dist[ia[r] * nb + j]) ? 0.0 : -1e9;
  Var scores = ad::add(ad::matmul(m.desc_a, ad::transpose(b.descriptors)),
                       tape.constant(std::move(mask)));
  Var weights = ad::softmax(scores, opt.temperature);
  m.pos_b = ad::matmul(weights, b.positions);
  m.desc_b = ad::matmul(weights, b.descriptors);
  return m;
}

}  // namespace

MatchSet match_nn(const KeypointSet& a, const KeypointSet& b, double max_px,
                  const MatchOptions& opt) {
  if (a.size() == 0 || b.size() == 0) return {};
  const auto& pa = a.positions.value();
  const auto& pb = b.positions.value();
  const double r2 = max_px * max_px;
  return match_impl(
      a, b,
      [&](std::size_t i, std::size_t j) {
        const double du = pa[2 * i] - pb[2 * j], dv = pa[2 * i + 1] - pb[2 * j + 1];
        return du * du + dv * dv <= r2;
      },
      opt);
}

MatchSet match_epipolar(const KeypointSet& left, const KeypointSet& right, double max_disparity,
                        const MatchOptions& opt) {
  if (left.size() == 0 || right.size() == 0) return {};
  const auto& pl = left.positions.value();
  const auto& pr = right.positions.value();
  return match_impl(
      left, right,
      [&](std::size_t i, std::size_t j) {
        const double d = pl[2 * i] - pr[2 * j];
        return std::abs(pl[2 * i + 1] - pr[2 * j + 1]) <= 1.0 && d > 0.0 && d <= max_disparity;
      },
      opt);
}

}  // namespace sendd::detect
