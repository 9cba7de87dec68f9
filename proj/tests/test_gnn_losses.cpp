// Copyright (c) 2026, The sendd-desk authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sendd/autodiff/ops.hpp"
#include "sendd/errors.hpp"
#include "sendd/gnn/gat.hpp"
#include "sendd/graph/knn.hpp"
#include "sendd/graph/node_features.hpp"
#include "sendd/losses/losses.hpp"
#include "sendd/model/model.hpp"

using namespace sendd;
using ad::Tensor;
using ad::Var;

namespace {

Tensor random_tensor(ad::Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = u(rng);
  return t;
}

geometry::Image random_image(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  geometry::Image img(w, h);
  for (auto& p : img.pixels) p = u(rng);
  return img;
}

}  // namespace

TEST(Gnn, WidthIsC) {
  model::ModelConfig cfg;
  const auto params = model::init_parameters(cfg);
  ad::Tape t;
  ad::ParamBinding p(t, params, false);
  const std::size_t n = 40;
  auto pts = random_tensor({n, 3}, 1, -20, 20);
  Var h = t.constant(random_tensor({n, 64}, 2));
  Var r = gnn::refine(p, "flow", h, pts.values(), 3, cfg);
  EXPECT_EQ(r.shape(), (ad::Shape{n, 64}));
  for (std::size_t l = 0; l < 4; ++l) {
    const auto& w = params.get("flow.gat" + std::to_string(l) + ".q.w");
    EXPECT_EQ(w.shape(), (ad::Shape{64, 64}));
  }
  EXPECT_EQ(params.get("stereo.interp.k.w").shape(), (ad::Shape{64, 64}));
}

TEST(Gnn, RefineNeedsEnoughNodes) {
  model::ModelConfig cfg;
  const auto params = model::init_parameters(cfg);
  ad::Tape t;
  ad::ParamBinding p(t, params, false);
  auto pts = random_tensor({2, 3}, 3);
  Var h = t.constant(random_tensor({2, 64}, 4));
  EXPECT_THROW(gnn::refine(p, "flow", h, pts.values(), 3, cfg), ContractError);
  auto pts3 = random_tensor({3, 3}, 3);
  Var h3 = t.constant(random_tensor({3, 64}, 4));
  EXPECT_NO_THROW(gnn::refine(p, "flow", h3, pts3.values(), 3, cfg));
}

TEST(Gnn, InterpolationEqualsQueryClique) {
  model::ModelConfig cfg;
  const auto params = model::init_parameters(cfg);
  ad::Tape t;
  ad::ParamBinding p(t, params, false);
  const std::size_t n = 25, q = 6;
  auto pts = random_tensor({n, 2}, 5, 0, 100);
  auto qpts = random_tensor({q, 2}, 6, 0, 100);
  Var refined = t.constant(random_tensor({n, 64}, 7));
  std::vector<double> pv(pts.values().begin(), pts.values().end());
  auto nodes = gnn::prepare_interpolation(p, "stereo", refined, pv, 2);
  Var qf = t.constant(random_tensor({q, 64}, 8));
  Var out = gnn::interpolate(p, "stereo", nodes, qf, qpts.values(), cfg);

  // Oracle: attention of the query vertex over its clique, computed by hand.
  const auto& wq = params.get("stereo.interp.q.w");
  const auto& bq = params.get("stereo.interp.q.b");
  const auto& wo = params.get("stereo.interp.o.w");
  const auto& bo = params.get("stereo.interp.o.b");
  const auto& K = nodes.keys.value();
  const auto& V = nodes.values.value();
  for (std::size_t i = 0; i < q; ++i) {
    const auto clique = graph::build_query_clique(
        std::span<const double>(qpts.data() + 2 * i, 2), pv, 2, cfg.k);
    ASSERT_EQ(clique.nodes.size(), 3u);
    std::vector<double> qq(64);
    for (std::size_t o = 0; o < 64; ++o) {
      double s = bq[o];
      for (std::size_t c = 0; c < 64; ++c) s += qf.value().at(i, c) * wq.at(c, o);
      qq[o] = s;
    }
    std::vector<double> a;
    for (auto j : clique.nodes) {
      double d = 0;
      for (std::size_t c = 0; c < 64; ++c) d += qq[c] * K.at(j, c);
      a.push_back(d / 8.0);
    }
    const double mx = std::max({a[0], a[1], a[2]});
    double z = 0;
    for (auto& x : a) z += (x = std::exp(x - mx));
    std::vector<double> att(64, 0.0);
    for (std::size_t s = 0; s < 3; ++s)
      for (std::size_t c = 0; c < 64; ++c) att[c] += a[s] / z * V.at(clique.nodes[s], c);
    for (std::size_t o = 0; o < 64; ++o) {
      double s = bo[o];
      for (std::size_t c = 0; c < 64; ++c) s += att[c] * wo.at(c, o);
      EXPECT_NEAR(out.value().at(i, o), qf.value().at(i, o) + s, 1e-10);
    }
  }
}

TEST(Gnn, PositionalEncodingWidth) {
  model::ModelConfig cfg;
  const auto params = model::init_parameters(cfg);
  ad::Tape t;
  ad::ParamBinding p(t, params, false);
  Var x = t.constant(random_tensor({5, 3}, 9));
  auto e = graph::positional_encode(p, "flow.enc_p", x, cfg.bands);
  EXPECT_EQ(e.shape(), (ad::Shape{5, 64}));
  EXPECT_EQ(ad::fourier_width(3, 6), 3u + 36);
}

TEST(Model, ConfigTextAndCompatibility) {
  model::ModelConfig cfg;
  auto back = model::ModelConfig::from_text(cfg.to_text());
  EXPECT_EQ(back.to_text(), cfg.to_text());
  const auto params = model::init_parameters(cfg);
  EXPECT_EQ(model::config_from_parameters(params).channels, 64u);
  model::ModelConfig other = cfg;
  other.channels = 32;
  EXPECT_THROW(model::check_compatible(other, params), ParameterError);
  other = cfg;
  other.k = 6;
  EXPECT_THROW(model::check_compatible(other, params), ParameterError);
  EXPECT_NO_THROW(model::check_compatible(cfg, params));
  // Optimiser state is dropped, the config entries stay.
  ad::ParameterStore with_state = params;
  with_state.add("__adam.m/stereo.head.b", ad::Tensor({1}));
  with_state.add("__step", ad::Tensor({1}));
  EXPECT_EQ(model::weights_only(with_state), params);
}

TEST(Model, InitIsDeterministic) {
  model::ModelConfig cfg;
  EXPECT_EQ(model::init_parameters(cfg), model::init_parameters(cfg));
  model::ModelConfig other = cfg;
  other.seed = 2;
  EXPECT_FALSE(model::init_parameters(cfg) == model::init_parameters(other));
}

// ---- losses ----

TEST(Losses, SsimProperties) {
  const auto a = random_image(20, 16, 1), b = random_image(20, 16, 2);
  EXPECT_NEAR(losses::ssim(a, a), 1.0, 1e-12);
  EXPECT_NEAR(losses::ssim(a, b), losses::ssim(b, a), 1e-9);
  geometry::Image ca(12, 12, 1, 0.25), cb(12, 12, 1, 0.75);
  const double c1 = 0.01 * 0.01;
  const double closed = (2 * 0.25 * 0.75 + c1) / (0.25 * 0.25 + 0.75 * 0.75 + c1);
  EXPECT_NEAR(losses::ssim(ca, cb), closed, 1e-12);
  EXPECT_THROW(losses::ssim(a, random_image(20, 15, 3)), DimensionError);
}

TEST(Losses, Photometric) {
  const auto a = random_image(24, 18, 4), b = random_image(24, 18, 5);
  const std::vector<bool> all(24 * 18, true);
  EXPECT_NEAR(losses::photometric_loss(a, a, all, 0.85), 0.0, 1e-12);
  double l1 = 0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) l1 += std::abs(a.pixels[i] - b.pixels[i]);
  l1 /= static_cast<double>(a.pixels.size());
  const double want = 0.85 * (1 - losses::ssim(a, b)) / 2 + 0.15 * l1;
  EXPECT_NEAR(losses::photometric_loss(a, b, all, 0.85), want, 1e-12);
  EXPECT_DOUBLE_EQ(0.85 * 0.5 + 0.15 * 1.0, 0.575);

  auto half = b;
  for (int y = 0; y < 18; ++y)
    for (int x = 0; x < 12; ++x) half.at(x, y) = a.at(x, y);
  EXPECT_LT(losses::photometric_loss(a, half, all, 0.85), losses::photometric_loss(a, b, all, 0.85));
  EXPECT_THROW(losses::photometric_loss(a, b, std::vector<bool>(24 * 18, false), 0.85),
               ContractError);
}

TEST(Losses, Smoothness) {
  geometry::Image flat(16, 12, 1, 0.5);
  geometry::FlowImage c(16, 12, 2, 3.0);
  EXPECT_EQ(losses::smoothness_loss(c, flat, 150.0), 0.0);
  geometry::FlowImage ramp(16, 12, 1);
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x < 16; ++x) ramp.at(x, y, 0) = x;
  EXPECT_DOUBLE_EQ(losses::smoothness_loss(ramp, flat, 150.0), 1.0);

  // Unit step in V exactly where the image has a full-contrast edge.
  geometry::Image edge(16, 12);
  geometry::FlowImage step(16, 12, 1);
  for (int y = 0; y < 12; ++y)
    for (int x = 8; x < 16; ++x) {
      edge.at(x, y) = 1.0;
      step.at(x, y, 0) = 1.0;
    }
  EXPECT_LT(losses::smoothness_loss(step, edge, 150.0), 1e-60);
  EXPECT_GT(losses::smoothness_loss(step, flat, 150.0), 0.05);
}

TEST(Losses, DepthMatch) {
  geometry::DepthMap a(10, 8, 1), b(10, 8, 1);
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(40, 80);
  for (auto& v : a.data) v = u(rng);
  EXPECT_EQ(losses::depth_match_loss(a, a), 0.0);
  b.data = a.data;
  for (auto& v : b.data) v += 2.0;
  EXPECT_NEAR(losses::depth_match_loss(b, a), 2.0, 1e-12);

  for (auto& v : b.data) v = u(rng);
  a.valid.assign(80, true);
  b.valid.assign(80, true);
  for (int i = 0; i < 80; i += 3) a.valid[i] = false;
  for (int i = 0; i < 80; i += 7) b.valid[i] = false;
  double s = 0;
  int n = 0;
  for (int i = 0; i < 80; ++i)
    if (a.valid[i] && b.valid[i]) {
      s += std::abs(a.data[i] - b.data[i]);
      ++n;
    }
  EXPECT_NEAR(losses::depth_match_loss(b, a), s / n, 1e-12);
  a.valid.assign(80, false);
  EXPECT_THROW(losses::depth_match_loss(b, a), ContractError);
}

TEST(Losses, TotalWeightedSum) {
  losses::LossWeights w;
  EXPECT_EQ(w.alpha, 0.85);
  EXPECT_EQ(w.beta, 150.0);
  EXPECT_EQ(w.lambda_d, 0.001);
  EXPECT_EQ(w.lambda_F, 0.01);
  EXPECT_EQ(w.lambda_D, 1.0);
  EXPECT_NEAR(losses::total_loss(0.2, 0.1, 1.0, 0.5, 3.0, w), 0.813, 1e-9);
  ad::Tape t;
  auto s = [&](double v) { return t.constant(Tensor::scalar(v)); };
  losses::LossTerms terms{s(0.2), s(0.1), s(1.0), s(0.5), s(3.0)};
  EXPECT_NEAR(losses::total_loss(terms, w).item(), 0.813, 1e-9);
  EXPECT_EQ(losses::total_loss(0, 0, 0, 0, 0, w), 0.0);
}

TEST(Losses, WeightValidation) {
  losses::LossWeights w;
  w.alpha = 1.5;
  EXPECT_THROW(w.validate(), ParameterError);
  w = {};
  w.lambda_F = -1;
  EXPECT_THROW(w.validate(), ParameterError);
}

TEST(Losses, LogFormat) {
  std::ostringstream out;
  losses::write_loss_log_header(out);
  EXPECT_EQ(out.str(), "step,L_p_stereo,L_p_flow,L_s_F,L_s_D,L_d,total,lr\n");
}
