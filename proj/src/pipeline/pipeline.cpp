// Copyright (c) 2026, The sendd-desk authors
// SPDX-License-Identifier: Apache-2.0

#include "sendd/pipeline/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "sendd/autodiff/ops.hpp"
#include "sendd/autodiff/ops_image.hpp"
#include "sendd/errors.hpp"
#include "sendd/graph/node_features.hpp"

namespace sendd::pipeline {

using ad::Tensor;
using ad::Var;
using detect::Mode;

namespace {

std::size_t min_nodes(const model::ModelConfig& cfg) {
  return std::max<std::size_t>(2, cfg.k - 1);
}

detect::MatchOptions match_options(const model::ModelConfig& cfg, Mode mode) {
  detect::MatchOptions o;
  o.mode = mode;
  o.temperature = cfg.match_temperature;
  o.mutual = cfg.mutual_check;
  return o;
}

detect::KeypointSet to_keypoints(ad::Tape& tape, const KeypointTensors& t) {
  detect::KeypointSet kp;
  kp.positions = tape.constant(t.positions);
  kp.descriptors = tape.constant(t.descriptors);
  kp.scores = t.scores;
  kp.cell_index = t.cells;
  return kp;
}

KeypointTensors to_tensors(const detect::KeypointSet& kp) {
  return {kp.positions.value(), kp.descriptors.value(), kp.scores, kp.cell_index};
}

gnn::InterpolationNodes to_nodes(ad::Tape& tape, const NodeTensors& n) {
  gnn::InterpolationNodes out;
  out.keys = tape.constant(n.keys);
  out.values = tape.constant(n.values);
  out.points = n.points;
  out.dim = n.dim;
  return out;
}

NodeTensors from_nodes(const gnn::InterpolationNodes& n, std::size_t matches) {
  NodeTensors t;
  t.keys = n.keys.value();
  t.values = n.values.value();
  t.points = n.points;
  t.dim = n.dim;
  t.matches = matches;
  t.ok = true;
  return t;
}

bool inside(const Vec2& q, const geometry::CameraRig& rig) {
  return q.x >= 0.0 && q.y >= 0.0 && q.x <= rig.width - 1.0 && q.y <= rig.height - 1.0 &&
         std::isfinite(q.x) && std::isfinite(q.y);
}

Tensor pixel_coords(std::size_t h, std::size_t w) {
  Tensor t({h * w, 2});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      t[2 * (y * w + x)] = static_cast<double>(x);
      t[2 * (y * w + x) + 1] = static_cast<double>(y);
    }
  return t;
}

}  // namespace

Model load_model(const std::filesystem::path& path) {
  auto store = ad::ParameterStore::load(path);
  Model m;
  m.config = model::config_from_parameters(store);
  model::check_compatible(m.config, store);
  m.params = model::weights_only(store);
  return m;
}

// ---- tape-level stages ----

FrameKeypoints detect_frame(ad::ParamBinding& p, const model::ModelConfig& cfg,
                            const geometry::Image& left, const geometry::Image& right, Mode mode) {
  FrameKeypoints f;
  Var gl = detect::prepare_image(p.tape(), left);
  Var gr = detect::prepare_image(p.tape(), right);
  f.left = detect::detect(p, gl, mode, cfg);
  detect::describe(p, gl, f.left, cfg);
  f.right = detect::detect(p, gr, mode, cfg);
  detect::describe(p, gr, f.right, cfg);
  return f;
}

StereoStage stereo_stage(ad::ParamBinding& p, const model::ModelConfig& cfg,
                         const FrameKeypoints& kp, int width, int height, Mode mode) {
  StereoStage s;
  s.width = width;
  s.height = height;
  s.max_disparity = cfg.max_disparity(width);
  s.matches = detect::match_epipolar(kp.left, kp.right, s.max_disparity, match_options(cfg, mode));
  if (s.matches.size() < min_nodes(cfg)) {
    s.diagnostic = "stereo: " + std::to_string(s.matches.size()) + " matches, need " +
                   std::to_string(min_nodes(cfg));
    return s;
  }
  Var h = graph::stereo_node_features(p, cfg, s.matches.pos_a, s.matches.pos_b, s.matches.desc_a,
                                      s.matches.desc_b, width, s.max_disparity);
  const auto& pts = s.matches.pos_a.value().values();
  Var refined = gnn::refine(p, "stereo", h, pts, 2, cfg);
  s.nodes = gnn::prepare_interpolation(p, "stereo", refined, {pts.begin(), pts.end()}, 2);
  s.ok = true;
  return s;
}

Var query_disparity(ad::ParamBinding& p, const model::ModelConfig& cfg, const StereoStage& s,
                    const Var& q) {
  return gnn::interpolate_disparity(p, cfg, s.nodes, q, s.width, s.height, s.max_disparity);
}

Var backproject_points(const Var& uv, const Var& depth, const geometry::CameraRig& rig) {
  const std::size_t n = uv.shape().at(0);
  Var xy = ad::affine_cols(uv, {1.0 / rig.fx, 1.0 / rig.fy}, {-rig.cx / rig.fx, -rig.cy / rig.fy});
  const Var parts[] = {xy, uv.tape()->constant(Tensor::filled({n, 1}, 1.0))};
  return ad::scale_rows(ad::concat_cols(parts), depth);
}

Var project_points(const Var& pts, const geometry::CameraRig& rig) {
  Var inv_z = ad::guarded_reciprocal(ad::slice_cols(pts, 2, 1), 1.0, geometry::kMinDepth);
  Var xy = ad::scale_rows(ad::slice_cols(pts, 0, 2), inv_z);
  return ad::affine_cols(xy, {rig.fx, rig.fy}, {rig.cx, rig.cy});
}

FlowStage flow_stage(ad::ParamBinding& p, const model::ModelConfig& cfg,
                     const geometry::CameraRig& rig, const FrameKeypoints& a,
                     const StereoStage& sa, const FrameKeypoints& b, const StereoStage& sb,
                     Mode mode) {
  FlowStage f;
  if (!sa.ok || !sb.ok) {
    f.diagnostic = "flow: stereo stage failed";
    return f;
  }
  f.matches = detect::match_nn(a.left, b.left, cfg.match_radius_px, match_options(cfg, mode));
  if (f.matches.size() < min_nodes(cfg)) {
    f.diagnostic = "flow: " + std::to_string(f.matches.size()) + " matches, need " +
                   std::to_string(min_nodes(cfg));
    return f;
  }
  const double fb = rig.focal_baseline();
  Var za = ad::guarded_reciprocal(query_disparity(p, cfg, sa, f.matches.pos_a), fb,
                                  geometry::kMinDisparity);
  Var zb = ad::guarded_reciprocal(query_disparity(p, cfg, sb, f.matches.pos_b), fb,
                                  geometry::kMinDisparity);
  f.points_a = backproject_points(f.matches.pos_a, za, rig);
  f.points_b = backproject_points(f.matches.pos_b, zb, rig);
  Var h = graph::flow_node_features(p, cfg, f.points_a, f.points_b, f.matches.desc_a,
                                    f.matches.desc_b);
  const auto& pts = f.points_a.value().values();
  Var refined = gnn::refine(p, "flow", h, pts, 3, cfg);
  f.nodes = gnn::prepare_interpolation(p, "flow", refined, {pts.begin(), pts.end()}, 3);
  f.ok = true;
  return f;
}

Var query_flow(ad::ParamBinding& p, const model::ModelConfig& cfg, const FlowStage& f,
               const Var& q3d) {
  return gnn::interpolate_flow(p, cfg, f.nodes, q3d);
}

Tensor grid_queries(int width, int height) {
  const std::size_t gw = width / kGridStride, gh = height / kGridStride;
  Tensor t({gw * gh, 2});
  for (std::size_t i = 0; i < gh; ++i)
    for (std::size_t j = 0; j < gw; ++j) {
      t[2 * (i * gw + j)] = kGridOffset + static_cast<double>(kGridStride * j);
      t[2 * (i * gw + j) + 1] = kGridOffset + static_cast<double>(kGridStride * i);
    }
  return t;
}

std::optional<losses::LossTerms> training_losses(ad::ParamBinding& p,
                                                 const model::ModelConfig& cfg,
                                                 const geometry::CameraRig& rig,
                                                 const TrainingSample& s,
                                                 const losses::LossWeights& w) {
  auto& tape = p.tape();
  const int width = s.left_t->width, height = s.left_t->height;
  const std::size_t W = width, H = height;
  if (W % kGridStride || H % kGridStride)
    throw DimensionError("training images must be divisible by the grid stride");
  const std::size_t gw = W / kGridStride, gh = H / kGridStride, q = gw * gh;

  const auto kt = detect_frame(p, cfg, *s.left_t, *s.right_t, Mode::Train);
  const auto kn = detect_frame(p, cfg, *s.left_next, *s.right_next, Mode::Train);
  const auto st = stereo_stage(p, cfg, kt, width, height, Mode::Train);
  const auto sn = stereo_stage(p, cfg, kn, width, height, Mode::Train);
  if (!st.ok || !sn.ok) return std::nullopt;
  const auto fs = flow_stage(p, cfg, rig, kt, st, kn, sn, Mode::Train);
  if (!fs.ok) return std::nullopt;

  const double fb = rig.focal_baseline();
  Var grid = tape.constant(grid_queries(width, height));
  Var d_t = query_disparity(p, cfg, st, grid);
  Var d_n = query_disparity(p, cfg, sn, grid);
  Var z_t = ad::guarded_reciprocal(d_t, fb, geometry::kMinDisparity);
  Var pts = backproject_points(grid, z_t, rig);
  Var flow = query_flow(p, cfg, fs, pts);
  Var flow2d = ad::sub(project_points(ad::add(pts, flow), rig), grid);

  Var img_t = tape.constant(s.left_t->gray_tensor());
  Var right_t = tape.constant(s.right_t->gray_tensor());
  Var img_n = tape.constant(s.left_next->gray_tensor());
  Var pix = tape.constant(pixel_coords(H, W));

  losses::LossTerms terms;
  try {
    // Right image sampled at (x - d, y).
    Var disp = ad::upsample_grid(ad::reshape(d_t, {gh, gw}), H, W, kGridStride, kGridOffset);
    const Var shift_parts[] = {ad::reshape(disp, {H * W, 1}),
                               tape.constant(Tensor({H * W, 1}))};
    std::vector<bool> valid_s;
    Var warped_r = ad::reshape(
        ad::bilinear_sample(right_t, ad::sub(pix, ad::concat_cols(shift_parts)), &valid_s), {H, W});
    terms.lp_stereo = losses::photometric_loss(img_t, warped_r, valid_s, w.alpha);

    Var flow_up = ad::upsample_grid(ad::reshape(flow2d, {gh, gw, 2}), H, W, kGridStride,
                                    kGridOffset);
    std::vector<bool> valid_f;
    Var warped_n = ad::reshape(
        ad::bilinear_sample(img_n, ad::add(pix, ad::reshape(flow_up, {H * W, 2})), &valid_f),
        {H, W});
    terms.lp_flow = losses::photometric_loss(img_t, warped_n, valid_f, w.alpha);

    const auto edges = losses::edge_weights(*s.left_t, w.beta);
    terms.ls_disp = losses::smoothness_loss(disp, edges);
    Var flow3d_up = ad::upsample_grid(ad::reshape(flow, {gh, gw, 3}), H, W, kGridStride,
                                      kGridOffset);
    terms.ls_flow = losses::smoothness_loss(flow3d_up, edges);

    // Depth of t+1 read where the flow lands, against depth of t moved by dz.
    Var z_n = ad::upsample_grid(
        ad::reshape(ad::guarded_reciprocal(d_n, fb, geometry::kMinDisparity), {gh, gw}), H, W,
        kGridStride, kGridOffset);
    std::vector<bool> valid_d;
    Var z_warped = ad::bilinear_sample(z_n, ad::add(grid, flow2d), &valid_d);
    Var z_target = ad::add(ad::slice_cols(pts, 2, 1), ad::slice_cols(flow, 2, 1));
    terms.l_d = losses::depth_match_loss(ad::reshape(z_warped, {q, 1}), z_target, valid_d);
  } catch (const ContractError&) {
    return std::nullopt;
  }
  return terms;
}

// ---- inference on plain tensors ----

FrameFeatures describe_frame(const Model& m, const geometry::Image& left,
                             const geometry::Image& right, int frame) {
  ad::Tape tape;
  ad::ParamBinding p(tape, m.params, false);
  const auto kp = detect_frame(p, m.config, left, right, Mode::Infer);
  FrameFeatures f;
  f.frame = frame;
  f.left = to_tensors(kp.left);
  f.right = to_tensors(kp.right);
  return f;
}

NodeTensors stereo_nodes(const Model& m, const FrameFeatures& frame, int width, int height) {
  ad::Tape tape;
  ad::ParamBinding p(tape, m.params, false);
  FrameKeypoints kp{to_keypoints(tape, frame.left), to_keypoints(tape, frame.right)};
  const auto s = stereo_stage(p, m.config, kp, width, height, Mode::Infer);
  if (!s.ok) {
    NodeTensors t;
    t.matches = s.matches.size();
    t.diagnostic = s.diagnostic;
    return t;
  }
  return from_nodes(s.nodes, s.matches.size());
}

namespace {

StereoStage stage_from(ad::Tape& tape, const model::ModelConfig& cfg, const NodeTensors& n,
                       const geometry::CameraRig& rig) {
  StereoStage s;
  s.width = rig.width;
  s.height = rig.height;
  s.max_disparity = cfg.max_disparity(rig.width);
  s.ok = n.ok;
  if (n.ok) s.nodes = to_nodes(tape, n);
  return s;
}

}  // namespace

NodeTensors flow_nodes(const Model& m, const geometry::CameraRig& rig, const FrameFeatures& a,
                       const NodeTensors& sa, const FrameFeatures& b, const NodeTensors& sb) {
  ad::Tape tape;
  ad::ParamBinding p(tape, m.params, false);
  FrameKeypoints ka{to_keypoints(tape, a.left), to_keypoints(tape, a.right)};
  FrameKeypoints kb{to_keypoints(tape, b.left), to_keypoints(tape, b.right)};
  const auto f = flow_stage(p, m.config, rig, ka, stage_from(tape, m.config, sa, rig), kb,
                            stage_from(tape, m.config, sb, rig), Mode::Infer);
  if (!f.ok) {
    NodeTensors t;
    t.matches = f.matches.size();
    t.diagnostic = f.diagnostic;
    return t;
  }
  return from_nodes(f.nodes, f.matches.size());
}

QueryEstimate interpolate_depth(const Model& m, const geometry::CameraRig& rig,
                                const NodeTensors& stereo, std::span<const Vec2> queries) {
  const std::size_t nq = queries.size();
  QueryEstimate e;
  e.disparity.resize(nq);
  e.depth.resize(nq);
  e.points.resize(nq);
  e.flow3d.resize(nq);
  e.flow2d.resize(nq);
  if (!stereo.ok) return e;
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < nq; ++i)
    if (inside(queries[i], rig)) idx.push_back(i);
  if (idx.empty()) return e;
  ad::Tape tape;
  ad::ParamBinding p(tape, m.params, false);
  Tensor q({idx.size(), 2});
  for (std::size_t r = 0; r < idx.size(); ++r) {
    q[2 * r] = queries[idx[r]].x;
    q[2 * r + 1] = queries[idx[r]].y;
  }
  const auto nodes = to_nodes(tape, stereo);
  Var d = gnn::interpolate_disparity(p, m.config, nodes, tape.constant(std::move(q)), rig.width,
                                     rig.height, m.config.max_disparity(rig.width));
  const auto& dv = d.value();
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const std::size_t i = idx[r];
    e.disparity[i] = dv[r];
    e.depth[i] = geometry::disparity_to_depth(dv[r], rig);
    e.points[i] = geometry::backproject(queries[i], e.depth[i], rig);
  }
  return e;
}

void interpolate_motion(const Model& m, const geometry::CameraRig& rig, const NodeTensors& flow,
                        QueryEstimate& e) {
  if (!flow.ok) return;
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < e.points.size(); ++i)
    if (e.points[i]) idx.push_back(i);
  if (idx.empty()) return;
  ad::Tape tape;
  ad::ParamBinding p(tape, m.params, false);
  Tensor q({idx.size(), 3});
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const Vec3& x = *e.points[idx[r]];
    q[3 * r] = x.x;
    q[3 * r + 1] = x.y;
    q[3 * r + 2] = x.z;
  }
  const auto nodes = to_nodes(tape, flow);
  Var f = gnn::interpolate_flow(p, m.config, nodes, tape.constant(std::move(q)));
  const auto& fv = f.value();
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const std::size_t i = idx[r];
    const Vec3 d{fv[3 * r], fv[3 * r + 1], fv[3 * r + 2]};
    e.flow3d[i] = d;
    e.flow2d[i] = geometry::flow3d_to_2d(*e.points[i], d, rig);
  }
}

DepthResult estimate_depth(const Model& m, const geometry::CameraRig& rig,
                           const geometry::Image& left, const geometry::Image& right,
                           std::span<const Vec2> queries) {
  const auto f = describe_frame(m, left, right);
  const auto s = stereo_nodes(m, f, rig.width, rig.height);
  DepthResult r;
  r.depth = interpolate_depth(m, rig, s, queries).depth;
  r.diagnostic = s.diagnostic;
  return r;
}

FlowResult estimate_flow(const Model& m, const geometry::CameraRig& rig,
                         const geometry::Image& left_t, const geometry::Image& right_t,
                         const geometry::Image& left_next, const geometry::Image& right_next,
                         std::span<const Vec2> queries) {
  const auto fa = describe_frame(m, left_t, right_t, 0);
  const auto fb = describe_frame(m, left_next, right_next, 1);
  const auto sa = stereo_nodes(m, fa, rig.width, rig.height);
  const auto sb = stereo_nodes(m, fb, rig.width, rig.height);
  const auto fl = flow_nodes(m, rig, fa, sa, fb, sb);
  FlowResult r;
  r.estimate = interpolate_depth(m, rig, sa, queries);
  interpolate_motion(m, rig, fl, r.estimate);
  r.diagnostic = !sa.ok ? sa.diagnostic : fl.diagnostic;
  return r;
}

FrameState FeatureCache::get(const Model& m, int frame, const geometry::Image& left,
                             const geometry::Image& right) {
  if (enabled_ && last_ && last_->features.frame == frame) {
    ++hits_;
    return *last_;
  }
  FrameState s;
  s.features = describe_frame(m, left, right, frame);
  s.stereo = stereo_nodes(m, s.features, left.width, left.height);
  ++computations_;
  if (enabled_) last_ = s;
  return s;
}

TrackResult track_sequence(const Model& m, const geometry::CameraRig& rig,
                           std::span<const geometry::Image> left,
                           std::span<const geometry::Image> right, std::span<const Vec2> queries,
                           const TrackOptions& opt) {
  if (opt.stride < 1) throw ParameterError("track: stride must be >= 1");
  if (left.size() != right.size()) throw ContractError("track: left/right frame counts differ");
  TrackResult r;
  if (left.empty()) return r;
  const int n = static_cast<int>(left.size());
  const std::size_t nq = queries.size();
  FeatureCache cache(opt.cache);

  std::vector<Vec2> uv(queries.begin(), queries.end());
  std::vector<Vec3> xyz(nq);
  std::vector<bool> alive(nq, true);
  std::vector<double> disp(nq, 0.0);

  auto active = [&]() {
    std::vector<Vec2> q(nq, Vec2{-1.0, -1.0});
    for (std::size_t i = 0; i < nq; ++i)
      if (alive[i]) q[i] = uv[i];
    return q;
  };
  auto record = [&](int frame, const QueryEstimate& e) {
    for (std::size_t i = 0; i < nq; ++i) {
      if (alive[i] && e.points[i]) {
        xyz[i] = *e.points[i];
        disp[i] = *e.disparity[i];
      } else {
        alive[i] = false;
      }
    }
    r.frames.push_back(frame);
    r.uv.push_back(uv);
    r.xyz.push_back(xyz);
    r.valid.push_back(alive);
    r.disparity.push_back(disp);
  };
  auto note = [&](int frame, const std::string& d) {
    if (!d.empty()) r.diagnostics.push_back("frame " + std::to_string(frame) + ": " + d);
  };

  int f = 0;
  std::optional<FrameState> tail;  // second frame of the latest pair
  for (; f + opt.stride < n; f += opt.stride) {
    const auto a = cache.get(m, f, left[f], right[f]);
    const auto b = cache.get(m, f + opt.stride, left[f + opt.stride], right[f + opt.stride]);
    tail = b;
    note(f, a.stereo.diagnostic);
    const auto fl = flow_nodes(m, rig, a.features, a.stereo, b.features, b.stereo);
    note(f, fl.diagnostic);
    const auto q = active();
    auto e = interpolate_depth(m, rig, a.stereo, q);
    interpolate_motion(m, rig, fl, e);
    record(f, e);
    std::vector<Vec3> pair_flow(nq);
    for (std::size_t i = 0; i < nq; ++i) {
      if (!alive[i]) continue;
      if (!e.flow3d[i] || !e.flow2d[i]) {
        alive[i] = false;
        continue;
      }
      pair_flow[i] = *e.flow3d[i];
      uv[i].x += e.flow2d[i]->x;
      uv[i].y += e.flow2d[i]->y;
    }
    r.flow3d.push_back(std::move(pair_flow));
  }
  const auto last = tail ? *tail : cache.get(m, f, left[f], right[f]);
  note(f, last.stereo.diagnostic);
  record(f, interpolate_depth(m, rig, last.stereo, active()));
  r.detect_invocations = cache.computations();
  r.cache_hits = cache.hits();
  return r;
}

void TrackResult::write_csv(std::ostream& out) const {
  out << "query_id,frame,u,v,x_mm,y_mm,z_mm,valid\n";
  char buf[256];
  for (std::size_t q = 0; q < queries(); ++q) {
    for (std::size_t k = 0; k < frames.size(); ++k) {
      const Vec2& p = uv[k][q];
      const Vec3& x = xyz[k][q];
      std::snprintf(buf, sizeof buf, "%zu,%d,%.6f,%.6f,%.6f,%.6f,%.6f,%d\n", q, frames[k], p.x,
                    p.y, x.x, x.y, x.z, valid[k][q] ? 1 : 0);
      out << buf;
    }
  }
}

geometry::Image overlay_tracks(const geometry::Image& image, const TrackResult& r,
                               std::size_t k) {
  geometry::Image out = image.channels == 3 ? image : image.gray().replicate_channels(3);
  if (k >= r.frames.size()) return out;
  auto put = [&](int x, int y, double cr, double cg, double cb) {
    if (x < 0 || y < 0 || x >= out.width || y >= out.height) return;
    out.at(x, y, 0) = cr;
    out.at(x, y, 1) = cg;
    out.at(x, y, 2) = cb;
  };
  for (std::size_t q = 0; q < r.queries(); ++q) {
    if (!r.valid[k][q]) continue;
    const int x = static_cast<int>(std::lround(r.uv[k][q].x));
    const int y = static_cast<int>(std::lround(r.uv[k][q].y));
    for (int d = -2; d <= 2; ++d) {
      put(x + d, y, 1.0, 0.1, 0.1);
      put(x, y + d, 1.0, 0.1, 0.1);
    }
  }
  return out;
}

}  // namespace sendd::pipeline
