// Copyright (c) 2026, The sendd-desk authors
// SPDX-License-Identifier: Apache-2.0

#include "sendd/synth/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "sendd/errors.hpp"

namespace sendd::synth {
namespace {

using geometry::Vec2;
using geometry::Vec3;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double lattice(std::uint64_t seed, int octave, long ix, long iy) {
  std::uint64_t h = splitmix(seed ^ (static_cast<std::uint64_t>(octave) << 56));
  h = splitmix(h ^ static_cast<std::uint64_t>(ix));
  h = splitmix(h ^ static_cast<std::uint64_t>(iy));
  return static_cast<double>(h >> 11) * (1.0 / 9007199254740992.0);
}

double smooth(double t) { return t * t * (3.0 - 2.0 * t); }

struct DeformTerm {
  Vec3 amplitude;
  double kx, ky, phase, time_phase;
};

class Scene {
 public:
  explicit Scene(const SceneSpec& s) : spec_(s), rig_(s.rig) {
    mm_per_px_ = s.depth_mm / rig_.fx;
    std::mt19937_64 rng(splitmix(s.seed ^ 0x5eedULL));
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    surface_phase_[0] = kTwoPi * uni(rng);
    surface_phase_[1] = kTwoPi * uni(rng);
    if (s.motion == Motion::Deform) {
      for (int k = 0; k < 3; ++k) {
        DeformTerm t;
        const double ang = kTwoPi * uni(rng);
        const double wavelength = (60.0 + 60.0 * uni(rng));
        t.kx = kTwoPi * std::cos(ang) / wavelength;
        t.ky = kTwoPi * std::sin(ang) / wavelength;
        t.phase = kTwoPi * uni(rng);
        t.time_phase = kTwoPi * uni(rng);
        Vec3 dir{uni(rng) - 0.5, uni(rng) - 0.5, 0.5 * (uni(rng) - 0.5)};
        const double n = std::sqrt(dir.x * dir.x + dir.y * dir.y + dir.z * dir.z) + 1e-12;
        const double a = s.deform_amplitude_mm / 3.0;
        t.amplitude = {a * dir.x / n, a * dir.y / n, a * dir.z / n};
        deform_.push_back(t);
      }
    }
    // Markers on a jittered grid of material positions inside the first view.
    const double half_w = (rig_.width / 2.0 - 3.0 * s.marker_radius_px) * mm_per_px_;
    const double half_h = (rig_.height / 2.0 - 3.0 * s.marker_radius_px) * mm_per_px_;
    const double cx_mm = (rig_.width / 2.0 - 0.5 - rig_.cx) * mm_per_px_;
    const double cy_mm = (rig_.height / 2.0 - 0.5 - rig_.cy) * mm_per_px_;
    for (int m = 0; m < s.markers; ++m) {
      for (int attempt = 0; attempt < 200; ++attempt) {
        Vec2 c{cx_mm + (2.0 * uni(rng) - 1.0) * half_w, cy_mm + (2.0 * uni(rng) - 1.0) * half_h};
        bool clear = true;
        for (const auto& o : markers_)
          clear = clear && std::hypot(o.x - c.x, o.y - c.y) > 5.0 * s.marker_radius_px * mm_per_px_;
        if (clear || attempt == 199) {
          markers_.push_back(c);
          break;
        }
      }
    }
  }

  Vec3 position(double s, double r, int frame) const {
    double z = spec_.depth_mm;
    if (spec_.surface == Surface::Sine) {
      const double w = kTwoPi / spec_.sine_period_mm;
      z += spec_.sine_amplitude_mm * std::sin(w * s + surface_phase_[0]) *
           std::cos(0.8 * w * r + surface_phase_[1]);
    }
    Vec3 p{s, r, z};
    if (spec_.motion == Motion::None) return p;
    const double t = static_cast<double>(frame);
    p.x += spec_.velocity_mm.x * t;
    p.y += spec_.velocity_mm.y * t;
    p.z += spec_.velocity_mm.z * t;
    const double seconds = t / spec_.fps;
    for (const auto& d : deform_) {
      const double a = std::sin(d.kx * s + d.ky * r + d.phase) *
                       (std::sin(kTwoPi * seconds / spec_.deform_period_s + d.time_phase) -
                        std::sin(d.time_phase));
      p.x += a * d.amplitude.x;
      p.y += a * d.amplitude.y;
      p.z += a * d.amplitude.z;
    }
    return p;
  }

  /// Material coordinates seen at pixel (u, v) by a camera offset camera_x mm.
  Vec2 solve(double u, double v, int frame, double camera_x) const {
    double s = (u - rig_.cx) * spec_.depth_mm / rig_.fx + camera_x;
    double r = (v - rig_.cy) * spec_.depth_mm / rig_.fy;
    for (int it = 0; it < 60; ++it) {
      const Vec3 p = position(s, r, frame);
      const double up = rig_.fx * (p.x - camera_x) / p.z + rig_.cx;
      const double vp = rig_.fy * p.y / p.z + rig_.cy;
      const double du = u - up, dv = v - vp;
      s += du * p.z / rig_.fx;
      r += dv * p.z / rig_.fy;
      if (std::abs(du) < 1e-10 && std::abs(dv) < 1e-10) break;
    }
    return {s, r};
  }

  double texture(double s, double r) const {
    if (spec_.octaves <= 0) return 0.5;
    double period = spec_.texture_period_px * mm_per_px_;
    double amp = 1.0, total = 0.0, norm = 0.0;
    for (int o = 0; o < spec_.octaves; ++o) {
      const double x = s / period, y = r / period;
      const double fx = std::floor(x), fy = std::floor(y);
      const long ix = static_cast<long>(fx), iy = static_cast<long>(fy);
      const double tx = smooth(x - fx), ty = smooth(y - fy);
      const double v00 = lattice(spec_.seed, o, ix, iy), v10 = lattice(spec_.seed, o, ix + 1, iy);
      const double v01 = lattice(spec_.seed, o, ix, iy + 1),
                   v11 = lattice(spec_.seed, o, ix + 1, iy + 1);
      total += amp * ((1 - ty) * ((1 - tx) * v00 + tx * v10) + ty * ((1 - tx) * v01 + tx * v11));
      norm += amp;
      amp *= 0.5;
      period *= 0.5;
    }
    return std::clamp(0.5 + 2.2 * (total / norm - 0.5), 0.05, 0.95);
  }

  /// Marker coverage in [0,1] and hard label (0 = none) at material (s, r).
  std::pair<double, int> marker(double s, double r) const {
    const double radius = spec_.marker_radius_px * mm_per_px_;
    const double edge = mm_per_px_;
    for (std::size_t m = 0; m < markers_.size(); ++m) {
      const double d = std::hypot(s - markers_[m].x, r - markers_[m].y);
      if (d < radius + edge) {
        const double cover = std::clamp((radius - d) / edge + 0.5, 0.0, 1.0);
        return {cover, d <= radius ? static_cast<int>(m) + 1 : 0};
      }
    }
    return {0.0, 0};
  }

  double shade(double s, double r) const {
    const double cover = marker(s, r).first;
    return texture(s, r) * (1.0 - 0.85 * cover);
  }

 private:
  const SceneSpec& spec_;
  const geometry::CameraRig& rig_;
  double mm_per_px_ = 1.0;
  double surface_phase_[2] = {0.0, 0.0};
  std::vector<DeformTerm> deform_;
  std::vector<Vec2> markers_;
};

double quantize(double v) { return std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0; }

}  // namespace

void SceneSpec::validate() const {
  rig.validate();
  if (frames < 1 || stride < 1 || !(fps > 0.0))
    throw ParameterError("scene: frames, stride and fps must be positive");
  if (octaves < 0 || !(texture_period_px > 0.0)) throw ParameterError("scene: bad texture");
  if (markers < 0 || markers > 254 || !(marker_radius_px > 0.0))
    throw ParameterError("scene: marker count must be in [0,254] with positive radius");
  if (!(sine_period_mm > 0.0) || !(deform_period_s > 0.0))
    throw ParameterError("scene: periods must be positive");
  double lowest = depth_mm;
  if (surface == Surface::Sine) lowest -= std::abs(sine_amplitude_mm);
  if (motion != Motion::None) {
    lowest += std::min(0.0, velocity_mm.z * (frames - 1));
    if (motion == Motion::Deform) lowest -= 2.0 * std::abs(deform_amplitude_mm);
  }
  if (!(lowest > geometry::kMinDepth))
    throw ParameterError("scene: surface depth reaches " + std::to_string(lowest) +
                         " mm, at or below the " + std::to_string(geometry::kMinDepth) +
                         " mm minimum");
  // Per-frame motion must stay inside the 256 px match radius.
  const double step_mm = std::sqrt(velocity_mm.x * velocity_mm.x + velocity_mm.y * velocity_mm.y +
                                   velocity_mm.z * velocity_mm.z) +
                         (motion == Motion::Deform ? 2.0 * std::abs(deform_amplitude_mm) : 0.0);
  if (motion != Motion::None && std::max(rig.fx, rig.fy) * step_mm / lowest >= 256.0)
    throw ParameterError("scene: motion exceeds 256 px per frame");
}

std::vector<std::optional<Vec2>> marker_centroids(const std::vector<int>& labels, int width,
                                                  int markers) {
  std::vector<double> sx(markers, 0.0), sy(markers, 0.0);
  std::vector<long> count(markers, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int l = labels[i];
    if (l <= 0 || l > markers) continue;
    sx[l - 1] += static_cast<double>(i % width);
    sy[l - 1] += static_cast<double>(i / width);
    ++count[l - 1];
  }
  std::vector<std::optional<Vec2>> out(markers);
  for (int m = 0; m < markers; ++m)
    if (count[m] > 0) out[m] = Vec2{sx[m] / count[m], sy[m] / count[m]};
  return out;
}

Clip generate_clip(const SceneSpec& spec, bool with_gt) {
  spec.validate();
  Clip clip;
  clip.spec = spec;
  const Scene scene(clip.spec);
  const auto& rig = clip.spec.rig;
  const int w = rig.width, h = rig.height;
  const std::size_t npix = static_cast<std::size_t>(w) * h;
  for (int f = 0; f < spec.frames; ++f) {
    geometry::Image left(w, h, 1), right(w, h, 1);
    geometry::DepthMap depth;
    geometry::FlowImage flow;
    std::vector<int> labels;
    if (with_gt) {
      depth = geometry::DepthMap(w, h, 1);
      depth.valid.assign(npix, true);
      labels.assign(npix, 0);
      if (f + 1 < spec.frames) {
        flow = geometry::FlowImage(w, h, 3);
        flow.valid.assign(npix, true);
      }
    }
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const Vec2 m = scene.solve(x, y, f, 0.0);
        left.at(x, y) = quantize(scene.shade(m.x, m.y));
        const Vec2 mr = scene.solve(x, y, f, rig.baseline_mm);
        right.at(x, y) = quantize(scene.shade(mr.x, mr.y));
        if (!with_gt) continue;
        const Vec3 p = scene.position(m.x, m.y, f);
        depth.at(x, y, 0) = p.z;
        labels[static_cast<std::size_t>(y) * w + x] = scene.marker(m.x, m.y).second;
        if (f + 1 < spec.frames) {
          const Vec3 q = scene.position(m.x, m.y, f + 1);
          flow.at(x, y, 0) = q.x - p.x;
          flow.at(x, y, 1) = q.y - p.y;
          flow.at(x, y, 2) = q.z - p.z;
        }
      }
    }
    clip.left.push_back(std::move(left));
    clip.right.push_back(std::move(right));
    if (with_gt) {
      clip.gt.centers.push_back(marker_centroids(labels, w, spec.markers));
      clip.gt.labels.push_back(std::move(labels));
      clip.gt.depth.push_back(std::move(depth));
      if (f + 1 < spec.frames) clip.gt.flow.push_back(std::move(flow));
    }
  }
  return clip;
}

ValidationReport validate_scene(const Clip& clip) {
  ValidationReport r;
  const auto& rig = clip.spec.rig;
  if (clip.left.empty() || clip.gt.depth.size() != clip.left.size()) {
    r.message = "clip has no frames or no depth ground truth";
    return r;
  }
  const int w = rig.width, h = rig.height, margin = 3;
  {
    const auto& img = clip.left.front();
    double mean = 0.0, sq = 0.0;
    for (double v : img.pixels) mean += v;
    mean /= static_cast<double>(img.pixels.size());
    for (double v : img.pixels) sq += (v - mean) * (v - mean);
    r.texture_std = std::sqrt(sq / static_cast<double>(img.pixels.size()));
    r.degenerate_texture = r.texture_std < 0.01;
  }
  auto rmse = [](double s, long n) { return n ? std::sqrt(s / static_cast<double>(n)) : INFINITY; };

  double s = 0.0;
  long n = 0;
  for (std::size_t f = 0; f < clip.left.size(); ++f) {
    for (int y = margin; y < h - margin; ++y) {
      for (int x = margin; x < w - margin; ++x) {
        const auto d = geometry::depth_to_disparity(clip.gt.depth[f].at(x, y, 0), rig);
        if (!d) continue;
        const double xr = x - *d;
        if (xr < margin) continue;
        const auto v = geometry::bilinear_sample(clip.right[f], xr, y);
        if (!v) continue;
        s += (*v - clip.left[f].at(x, y)) * (*v - clip.left[f].at(x, y));
        ++n;
      }
    }
  }
  r.stereo_rmse = rmse(s, n);

  for (std::size_t f = 0; f + 1 < clip.left.size() && f < clip.gt.flow.size(); ++f) {
    s = 0.0;
    n = 0;
    for (int y = margin; y < h - margin; ++y) {
      for (int x = margin; x < w - margin; ++x) {
        const auto p = geometry::backproject({double(x), double(y)}, clip.gt.depth[f].at(x, y, 0), rig);
        if (!p) continue;
        const auto& fl = clip.gt.flow[f];
        const auto d2 = geometry::flow3d_to_2d(*p, {fl.at(x, y, 0), fl.at(x, y, 1), fl.at(x, y, 2)}, rig);
        if (!d2) continue;
        const double xs = x + d2->x, ys = y + d2->y;
        if (xs < margin || ys < margin || xs > w - 1 - margin || ys > h - 1 - margin) continue;
        const auto v = geometry::bilinear_sample(clip.left[f + 1], xs, ys);
        if (!v) continue;
        s += (*v - clip.left[f].at(x, y)) * (*v - clip.left[f].at(x, y));
        ++n;
      }
    }
    r.temporal_rmse = std::max(r.temporal_rmse, rmse(s, n));
  }

  r.passed = !r.degenerate_texture && r.stereo_rmse < kConsistencyRmse &&
             r.temporal_rmse < kConsistencyRmse;
  if (r.degenerate_texture)
    r.message = "degenerate texture: matching is ill-posed";
  else if (!r.passed)
    r.message = "rendering inconsistent with ground truth";
  else
    r.message = "ok";
  return r;
}

}  // namespace sendd::synth
