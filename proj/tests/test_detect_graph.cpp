// Copyright (c) 2026, The sendd-desk authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "sendd/autodiff/ops.hpp"
#include "sendd/detect/detector.hpp"
#include "sendd/detect/matching.hpp"
#include "sendd/errors.hpp"
#include "sendd/graph/knn.hpp"
#include "sendd/model/model.hpp"
#include "sendd/synth/scene.hpp"

using namespace sendd;
using namespace sendd::detect;

namespace {

geometry::Image textured(int w, int h, std::uint64_t seed) {
  synth::SceneSpec s;
  s.seed = seed;
  s.rig.width = w;
  s.rig.height = h;
  s.rig.cx = (w - 1) / 2.0;
  s.rig.cy = (h - 1) / 2.0;
  s.frames = 1;
  s.markers = 0;
  return synth::generate_clip(s, false).left[0];
}

// Keypoints with given positions and descriptors, no detector involved.
KeypointSet make_set(ad::Tape& t, const std::vector<double>& pos, const std::vector<double>& desc,
                     std::size_t c) {
  KeypointSet k;
  const std::size_t n = pos.size() / 2;
  k.positions = t.constant(ad::Tensor({n, 2}, pos));
  k.descriptors = t.constant(ad::Tensor({n, c}, desc));
  k.scores.assign(n, 0.0);
  k.cell_index.resize(n);
  std::iota(k.cell_index.begin(), k.cell_index.end(), 0);
  return k;
}

}  // namespace

TEST(Structure, DefaultConstants) {
  model::ModelConfig cfg;
  EXPECT_EQ(cfg.channels, 64u);
  EXPECT_EQ(cfg.k, 4u);
  EXPECT_EQ(cfg.dilations, (std::vector<std::size_t>{1, 8, 8, 1}));
  EXPECT_EQ(cfg.cell, 32u);
  EXPECT_EQ(cfg.match_radius_px, 256.0);
}

TEST(Detector, OneKeypointPerCell) {
  model::ModelConfig cfg;
  const auto params = model::init_parameters(cfg);
  for (auto [w, h] : {std::pair{256, 192}, {1280, 1024}}) {
    ad::Tape t;
    ad::ParamBinding p(t, params, false);
    auto gray = prepare_image(t, textured(w, h, 3));
    auto kp = detect::detect(p, gray, Mode::Infer, cfg);
    EXPECT_EQ(kp.size(), static_cast<std::size_t>((w / 32) * (h / 32)));
    const auto& pos = kp.positions.value();
    for (std::size_t i = 0; i < kp.size(); ++i) {
      const std::size_t cx = kp.cell_index[i] % (w / 32), cy = kp.cell_index[i] / (w / 32);
      EXPECT_GE(pos[2 * i], cx * 32.0);
      EXPECT_LT(pos[2 * i], (cx + 1) * 32.0);
      EXPECT_GE(pos[2 * i + 1], cy * 32.0);
      EXPECT_LT(pos[2 * i + 1], (cy + 1) * 32.0);
    }
  }
  EXPECT_EQ(1280u / 32 * (1024u / 32), 1280u);
}

TEST(Detector, RejectsPartialCells) {
  model::ModelConfig cfg;
  const auto params = model::init_parameters(cfg);
  ad::Tape t;
  ad::ParamBinding p(t, params, false);
  auto gray = prepare_image(t, geometry::Image(100, 64));
  EXPECT_THROW(detect::detect(p, gray, Mode::Infer, cfg), DimensionError);
}

TEST(Detector, TrainPositionsStayInCells) {
  model::ModelConfig cfg;
  const auto params = model::init_parameters(cfg);
  ad::Tape t;
  ad::ParamBinding p(t, params, true);
  auto gray = prepare_image(t, textured(128, 96, 5));
  auto kp = detect::detect(p, gray, Mode::Train, cfg);
  ASSERT_EQ(kp.size(), 12u);
  const auto& pos = kp.positions.value();
  for (std::size_t i = 0; i < kp.size(); ++i) {
    const std::size_t cx = i % 4, cy = i / 4;
    EXPECT_GE(pos[2 * i], cx * 32.0);
    EXPECT_LE(pos[2 * i], cx * 32.0 + 31.0);
    EXPECT_GE(pos[2 * i + 1], cy * 32.0);
    EXPECT_LE(pos[2 * i + 1], cy * 32.0 + 31.0);
  }
}

TEST(Detector, TrainPositionsNearInferKeypoints) {
  model::ModelConfig cfg;
  const auto params = model::init_parameters(cfg);
  ad::Tape t;
  ad::ParamBinding p(t, params, false);
  auto gray = prepare_image(t, textured(128, 96, 6));
  const auto soft = detect::detect(p, gray, Mode::Train, cfg).positions.value();
  const auto hard = detect::detect(p, gray, Mode::Infer, cfg).positions.value();
  for (std::size_t i = 0; i < soft.size(); ++i)
    EXPECT_LE(std::abs(soft[i] - hard[i]), static_cast<double>(cfg.detect_window));
}

TEST(Descriptor, UnitRowsOfWidthC) {
  model::ModelConfig cfg;
  const auto params = model::init_parameters(cfg);
  ad::Tape t;
  ad::ParamBinding p(t, params, false);
  auto gray = prepare_image(t, textured(256, 192, 8));
  auto kp = detect::detect(p, gray, Mode::Infer, cfg);
  describe(p, gray, kp, cfg);
  const auto& d = kp.descriptors.value();
  ASSERT_EQ(d.shape(), (ad::Shape{48, 64}));
  for (std::size_t r = 0; r < 48; ++r) {
    double s = 0;
    for (std::size_t c = 0; c < 64; ++c) s += d.at(r, c) * d.at(r, c);
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

TEST(Matching, EpipolarConstraint) {
  ad::Tape t;
  // Left 0 matches right 0 on the same row; left 1's best descriptor is on another row.
  auto left = make_set(t, {50, 10, 80, 40}, {1, 0, 0, 1}, 2);
  auto right = make_set(t, {40, 10.5, 70, 60, 75, 40}, {1, 0, 0, 1, 0.6, 0.8}, 2);
  MatchOptions opt;
  auto m = match_epipolar(left, right, 30.0, opt);
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m.pairs[0], (std::pair<std::size_t, std::size_t>{0, 0}));
  EXPECT_EQ(m.pairs[1], (std::pair<std::size_t, std::size_t>{1, 2}));
  // Negative or too large disparity is not a candidate.
  auto far = make_set(t, {10, 10, 100, 40}, {1, 0, 0, 1}, 2);
  EXPECT_TRUE(match_epipolar(far, make_set(t, {20, 10, 40, 40}, {1, 0, 0, 1}, 2), 30.0, opt)
                  .empty());
}

TEST(Matching, RadiusAndMutualCheck) {
  ad::Tape t;
  auto a = make_set(t, {0, 0, 10, 0}, {1, 0, 0.9, 0.43588989}, 2);
  auto b = make_set(t, {5, 0, 300, 0}, {1, 0, 0, 1}, 2);
  MatchOptions opt;
  // Both a-points prefer b0; only the mutual one survives, b1 is beyond 256 px.
  auto m = match_nn(a, b, 256.0, opt);
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(m.pairs[0], (std::pair<std::size_t, std::size_t>{0, 0}));
  opt.mutual = false;
  EXPECT_EQ(match_nn(a, b, 256.0, opt).size(), 2u);
  EXPECT_TRUE(match_nn(a, b, 1.0, opt).empty());
}

TEST(Matching, SoftMatchTracksHardMatch) {
  ad::Tape t;
  auto a = make_set(t, {0, 0}, {1, 0}, 2);
  auto b = make_set(t, {4, 1, 90, 50}, {1, 0, 0, 1}, 2);
  MatchOptions opt;
  opt.mode = Mode::Train;
  opt.temperature = 0.05;
  auto m = match_nn(a, b, 256.0, opt);
  ASSERT_EQ(m.size(), 1u);
  EXPECT_NEAR(m.pos_b.value()[0], 4.0, 1e-6);
  EXPECT_NEAR(m.pos_b.value()[1], 1.0, 1e-6);
}

// ---- dilated k-NN against an independent brute force ----

namespace {

std::vector<std::vector<std::size_t>> brute_dilated_knn(const std::vector<double>& pts,
                                                        std::size_t dim, std::size_t k,
                                                        std::size_t dilation) {
  const std::size_t n = pts.size() / dim;
  std::size_t d = dilation;
  while (d > 1 && k * d > n - 1) --d;
  if (k * d > n - 1) d = 1;
  std::vector<std::vector<std::size_t>> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double s = 0;
      for (std::size_t c = 0; c < dim; ++c) {
        const double diff = pts[j * dim + c] - pts[i * dim + c];
        s += diff * diff;
      }
      all.emplace_back(s, j);
    }
    std::sort(all.begin(), all.end());
    for (std::size_t r = d; r <= std::min(k * d, all.size()); r += d)
      out[i].push_back(all[r - 1].second);
  }
  return out;
}

}  // namespace

TEST(Knn, MatchesBruteForce) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> un(2, 200), ud(1, 3), upick(0, 2);
  std::uniform_real_distribution<double> coord(-50, 50);
  std::uniform_int_distribution<int> grid(0, 6);
  const std::size_t dilations[] = {1, 2, 8};
  for (int inst = 0; inst < 200; ++inst) {
    const std::size_t n = un(rng), dim = ud(rng), dil = dilations[upick(rng)];
    std::vector<double> pts(n * dim);
    // Every fourth instance on an integer lattice, so ties occur.
    for (auto& v : pts) v = inst % 4 == 0 ? grid(rng) : coord(rng);
    const auto g = graph::build_knn_graph(pts, dim, 4, dil);
    const auto want = brute_dilated_knn(pts, dim, 4, dil);
    ASSERT_EQ(g.neighbors, want) << "instance " << inst << " n=" << n << " dim=" << dim
                                 << " dilation=" << dil;
  }
}

TEST(Knn, DilationClamp) {
  EXPECT_EQ(graph::effective_dilation(100, 4, 8), 8u);
  EXPECT_EQ(graph::effective_dilation(33, 4, 8), 8u);
  EXPECT_EQ(graph::effective_dilation(32, 4, 8), 7u);
  EXPECT_EQ(graph::effective_dilation(5, 4, 8), 1u);
  EXPECT_EQ(graph::effective_dilation(3, 4, 8), 1u);
}

TEST(Knn, RanksAndDistances) {
  const std::vector<double> pts{0, 1, 3, 6, 10, 15, 21, 28, 36, 45};
  const auto g = graph::build_knn_graph(pts, 1, 2, 2);
  EXPECT_EQ(g.dilation, 2u);
  EXPECT_EQ(g.neighbors[0], (std::vector<std::size_t>{2, 4}));
  EXPECT_EQ(g.ranks[0], (std::vector<std::size_t>{2, 4}));
  EXPECT_DOUBLE_EQ(g.distances[0][1], 10.0);
  std::ostringstream csv;
  graph::write_edges_csv(csv, g);
  EXPECT_EQ(csv.str().substr(0, 31), "node,neighbor,rank,distance\n0,2");
}

TEST(Knn, Errors) {
  const std::vector<double> one{1.0};
  EXPECT_THROW(graph::build_knn_graph(one, 1, 4, 1), ContractError);
  const std::vector<double> odd{1, 2, 3};
  EXPECT_THROW(graph::build_knn_graph(odd, 2, 4, 1), DimensionError);
}

TEST(Knn, QueryClique) {
  const std::vector<double> pts{0, 0, 1, 0, 0, 1, 5, 5, 9, 9};
  const std::vector<double> q{0.1, 0.1};
  const auto c = graph::build_query_clique(q, pts, 2, 4);
  EXPECT_EQ(c.nodes, (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(c.edges.size(), 6u);
}
