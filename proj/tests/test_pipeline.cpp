// Copyright (c) 2026, The sendd-desk authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "sendd/autodiff/ops.hpp"
#include "sendd/model/model.hpp"
#include "sendd/pipeline/pipeline.hpp"
#include "sendd/synth/scene.hpp"

using namespace sendd;
using namespace sendd::pipeline;

namespace {

const Model& test_model() {
  static const Model m{model::init_parameters({}), {}};
  return m;
}

const synth::Clip& test_clip() {
  static const synth::Clip c = [] {
    synth::SceneSpec s;
    s.seed = 31;
    s.surface = synth::Surface::Sine;
    s.motion = synth::Motion::Rigid;
    s.velocity_mm = {0.3, 0.1, 0};
    s.frames = 5;
    s.markers = 0;
    return synth::generate_clip(s, false);
  }();
  return c;
}

std::vector<Vec2> some_queries() {
  return {{40, 30}, {128, 96}, {200.5, 150.25}, {10, 180}};
}

std::string csv_of(const TrackResult& r) {
  std::ostringstream out;
  r.write_csv(out);
  return out.str();
}

}  // namespace

TEST(Pipeline, GridQueries) {
  auto g = grid_queries(32, 16);
  ASSERT_EQ(g.shape(), (ad::Shape{8, 2}));
  EXPECT_EQ(g[0], 3.5);
  EXPECT_EQ(g[1], 3.5);
  EXPECT_EQ(g[2], 11.5);
  EXPECT_EQ(g[2 * 4 + 1], 11.5);
}

TEST(Pipeline, ProjectBackprojectOnTape) {
  geometry::CameraRig rig;
  ad::Tape t;
  auto uv = t.constant(ad::Tensor({2, 2}, {10, 20, 150.5, 90}));
  auto z = t.constant(ad::Tensor({2, 1}, {55, 70}));
  auto p = backproject_points(uv, z, rig);
  auto back = project_points(p, rig);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(back.value()[i], uv.value()[i], 1e-9);
  EXPECT_NEAR(p.value()[0], (10 - rig.cx) * 55 / rig.fx, 1e-12);
}

TEST(Pipeline, DepthAtQueries) {
  const auto& c = test_clip();
  auto q = some_queries();
  q.push_back({-5, 10});
  q.push_back({300, 10});
  auto r = estimate_depth(test_model(), c.spec.rig, c.left[0], c.right[0], q);
  ASSERT_EQ(r.depth.size(), q.size());
  EXPECT_TRUE(r.diagnostic.empty()) << r.diagnostic;
  EXPECT_FALSE(r.depth[4].has_value());
  EXPECT_FALSE(r.depth[5].has_value());
  for (std::size_t i = 0; i < 4; ++i)
    if (r.depth[i]) {
      EXPECT_GT(*r.depth[i], geometry::kMinDepth);
    }
}

TEST(Pipeline, DuplicateQueriesAgree) {
  const auto& c = test_clip();
  std::vector<Vec2> q{{64, 64}, {64, 64}, {64, 64}};
  auto r = estimate_flow(test_model(), c.spec.rig, c.left[0], c.right[0], c.left[1], c.right[1],
                         q);
  ASSERT_EQ(r.estimate.flow3d.size(), 3u);
  EXPECT_EQ(r.estimate.disparity[0], r.estimate.disparity[1]);
  EXPECT_EQ(r.estimate.disparity[0], r.estimate.disparity[2]);
  if (r.estimate.flow3d[0]) {
    EXPECT_EQ(*r.estimate.flow3d[0], *r.estimate.flow3d[2]);
  }
}

TEST(Pipeline, NoQueries) {
  const auto& c = test_clip();
  auto r = estimate_flow(test_model(), c.spec.rig, c.left[0], c.right[0], c.left[1], c.right[1],
                         {});
  EXPECT_TRUE(r.estimate.flow3d.empty());
  auto t = track_sequence(test_model(), c.spec.rig, c.left, c.right, {}, {});
  EXPECT_EQ(t.queries(), 0u);
  EXPECT_EQ(csv_of(t).find('\n'), csv_of(t).size() - 1);  // header only
}

TEST(Pipeline, QueriesIndependentOfEachOther) {
  // Node stages do not depend on the queries, so one query gives the same
  // answer alone or among others.
  const auto& c = test_clip();
  const auto q = some_queries();
  auto all = estimate_depth(test_model(), c.spec.rig, c.left[0], c.right[0], q);
  for (std::size_t i = 0; i < q.size(); ++i) {
    auto one = estimate_depth(test_model(), c.spec.rig, c.left[0], c.right[0],
                              std::span<const Vec2>(&q[i], 1));
    EXPECT_EQ(one.depth[0], all.depth[i]);
  }
}

TEST(Tracking, CacheIsTransparent) {
  const auto& c = test_clip();
  const auto q = some_queries();
  TrackOptions on, off;
  off.cache = false;
  auto a = track_sequence(test_model(), c.spec.rig, c.left, c.right, q, on);
  auto b = track_sequence(test_model(), c.spec.rig, c.left, c.right, q, off);
  EXPECT_EQ(csv_of(a), csv_of(b));
  const std::size_t n = c.left.size();
  EXPECT_EQ(b.detect_invocations, 2 * (n - 1));
  EXPECT_EQ(a.detect_invocations, n);
  EXPECT_EQ(b.detect_invocations - a.detect_invocations, n - 2);
}

TEST(Tracking, Stride) {
  const auto& c = test_clip();
  TrackOptions o;
  o.stride = 2;
  auto r = track_sequence(test_model(), c.spec.rig, c.left, c.right, some_queries(), o);
  EXPECT_EQ(r.frames, (std::vector<int>{0, 2, 4}));
  EXPECT_EQ(r.flow3d.size(), 2u);
  o.stride = 3;
  r = track_sequence(test_model(), c.spec.rig, c.left, c.right, some_queries(), o);
  EXPECT_EQ(r.frames, (std::vector<int>{0, 3}));
}

TEST(Tracking, CsvShape) {
  const auto& c = test_clip();
  const auto q = some_queries();
  auto r = track_sequence(test_model(), c.spec.rig, c.left, c.right, q, {});
  std::istringstream in(csv_of(r));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "query_id,frame,u,v,x_mm,y_mm,z_mm,valid");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, q.size() * c.left.size());
}

TEST(Tracking, OutsideQueryStaysInvalid) {
  const auto& c = test_clip();
  std::vector<Vec2> q{{-20, 10}, {100, 100}};
  auto r = track_sequence(test_model(), c.spec.rig, c.left, c.right, q, {});
  for (const auto& v : r.valid) EXPECT_FALSE(v[0]);
}

TEST(Tracking, Overlay) {
  const auto& c = test_clip();
  auto r = track_sequence(test_model(), c.spec.rig, c.left, c.right, some_queries(), {});
  auto img = overlay_tracks(c.left[0], r, 0);
  EXPECT_EQ(img.channels, 3);
  EXPECT_EQ(img.width, c.left[0].width);
}

TEST(Training, LossTermsOnAPair) {
  const auto& c = test_clip();
  const auto& m = test_model();
  ad::Tape tape;
  ad::ParamBinding p(tape, m.params, true);
  TrainingSample s{&c.left[0], &c.right[0], &c.left[1], &c.right[1]};
  auto terms = training_losses(p, m.config, c.spec.rig, s, {});
  ASSERT_TRUE(terms.has_value());
  for (const ad::Var* v : {&terms->lp_stereo, &terms->lp_flow, &terms->ls_flow, &terms->ls_disp,
                           &terms->l_d}) {
    EXPECT_GE(v->item(), 0.0);
    EXPECT_TRUE(std::isfinite(v->item()));
  }
  auto total = losses::total_loss(*terms, {});
  tape.backward(total);
  // Every module receives gradient.
  const auto grads = p.gradients();
  std::map<std::string, double> by_module;
  for (std::size_t i = 0; i < m.params.size(); ++i) {
    const auto& name = m.params.name(i);
    if (model::is_metadata(name)) continue;
    double s2 = 0;
    for (double g : grads[i].values()) s2 += std::abs(g);
    by_module[name.substr(0, name.find('.'))] += s2;
  }
  for (const auto& [mod, g] : by_module) EXPECT_GT(g, 0.0) << mod;
}
