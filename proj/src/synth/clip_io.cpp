// Copyright (c) 2026, The sendd-desk authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "sendd/errors.hpp"
#include "sendd/geometry/image_io.hpp"
#include "sendd/synth/scene.hpp"

namespace sendd::synth {
namespace {

namespace fs = std::filesystem;
using geometry::RawGrid;

const char* surface_name(Surface s) { return s == Surface::Plane ? "plane" : "sine"; }
const char* motion_name(Motion m) {
  switch (m) {
    case Motion::None: return "none";
    case Motion::Rigid: return "rigid";
    case Motion::Deform: return "deform";
  }
  return "none";
}

void put_f32(std::ostream& out, double v) {
  const float f = static_cast<float>(v);
  std::uint32_t u = std::bit_cast<std::uint32_t>(f);
  unsigned char b[4] = {static_cast<unsigned char>(u), static_cast<unsigned char>(u >> 8),
                        static_cast<unsigned char>(u >> 16), static_cast<unsigned char>(u >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw FormatError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string frame_name(const std::string& stem, int frame, const std::string& ext) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d", frame);
  return stem + "_" + buf + ext;
}

std::string SceneSpec::to_text() const {
  std::ostringstream os;
  os.precision(17);
  os << "seed=" << seed << "\n"
     << rig.to_text() << "octaves=" << octaves << "\ntexture_period_px=" << texture_period_px
     << "\nsurface=" << surface_name(surface) << "\ndepth_mm=" << depth_mm
     << "\nsine_amplitude_mm=" << sine_amplitude_mm << "\nsine_period_mm=" << sine_period_mm
     << "\nmotion=" << motion_name(motion) << "\nvelocity_x_mm=" << velocity_mm.x
     << "\nvelocity_y_mm=" << velocity_mm.y << "\nvelocity_z_mm=" << velocity_mm.z
     << "\ndeform_amplitude_mm=" << deform_amplitude_mm << "\ndeform_period_s=" << deform_period_s
     << "\nmarkers=" << markers << "\nmarker_radius_px=" << marker_radius_px
     << "\nframes=" << frames << "\nfps=" << fps << "\nstride=" << stride << "\n";
  return os.str();
}

SceneSpec SceneSpec::from_text(const std::string& text) {
  SceneSpec s;
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("scene spec line without '=': " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto take = [&](const char* key, auto& field) {
    auto it = kv.find(key);
    if (it == kv.end()) return;
    std::istringstream v(it->second);
    if (!(v >> field)) throw FormatError(std::string("scene spec: bad value for ") + key);
    kv.erase(it);
  };
  take("seed", s.seed);
  take("fx", s.rig.fx);
  take("fy", s.rig.fy);
  take("cx", s.rig.cx);
  take("cy", s.rig.cy);
  take("baseline_mm", s.rig.baseline_mm);
  take("width", s.rig.width);
  take("height", s.rig.height);
  take("octaves", s.octaves);
  take("texture_period_px", s.texture_period_px);
  take("depth_mm", s.depth_mm);
  take("sine_amplitude_mm", s.sine_amplitude_mm);
  take("sine_period_mm", s.sine_period_mm);
  take("velocity_x_mm", s.velocity_mm.x);
  take("velocity_y_mm", s.velocity_mm.y);
  take("velocity_z_mm", s.velocity_mm.z);
  take("deform_amplitude_mm", s.deform_amplitude_mm);
  take("deform_period_s", s.deform_period_s);
  take("markers", s.markers);
  take("marker_radius_px", s.marker_radius_px);
  take("frames", s.frames);
  take("fps", s.fps);
  take("stride", s.stride);
  std::string surface, motion;
  take("surface", surface);
  take("motion", motion);
  if (!surface.empty()) {
    if (surface == "plane") s.surface = Surface::Plane;
    else if (surface == "sine") s.surface = Surface::Sine;
    else throw ParameterError("scene spec: unknown surface " + surface);
  }
  if (!motion.empty()) {
    if (motion == "none") s.motion = Motion::None;
    else if (motion == "rigid") s.motion = Motion::Rigid;
    else if (motion == "deform") s.motion = Motion::Deform;
    else throw ParameterError("scene spec: unknown motion " + motion);
  }
  if (!kv.empty()) throw ParameterError("scene spec: unknown key " + kv.begin()->first);
  return s;
}

void write_clip(const Clip& clip, const fs::path& dir) {
  fs::create_directories(dir);
  const int w = clip.spec.rig.width, h = clip.spec.rig.height;
  {
    std::ofstream out(dir / "spec.txt");
    if (!out) throw FormatError("cannot write " + (dir / "spec.txt").string());
    out << clip.spec.to_text();
  }
  for (int f = 0; f < clip.frames(); ++f) {
    geometry::write_png(dir / frame_name("left", f, ".png"), clip.left[f].replicate_channels(3));
    geometry::write_png(dir / frame_name("right", f, ".png"), clip.right[f].replicate_channels(3));
    if (static_cast<std::size_t>(f) < clip.gt.depth.size()) {
      RawGrid g{w, h, std::vector<std::uint16_t>(static_cast<std::size_t>(w) * h)};
      const auto& d = clip.gt.depth[f];
      for (std::size_t i = 0; i < g.values.size(); ++i) {
        const double v = d.valid.empty() || d.valid[i] ? std::round(d.data[i] * 10.0) : 0.0;
        g.values[i] = static_cast<std::uint16_t>(std::clamp(v, 0.0, 65535.0));
      }
      geometry::write_pgm16(dir / frame_name("depth", f, ".pgm"), g);
    }
    if (static_cast<std::size_t>(f) < clip.gt.labels.size()) {
      RawGrid g{w, h, {}};
      for (int l : clip.gt.labels[f]) g.values.push_back(static_cast<std::uint16_t>(l));
      geometry::write_png_raw(dir / frame_name("markers", f, ".png"), g, 8);
    }
    if (static_cast<std::size_t>(f) < clip.gt.flow.size()) {
      std::ofstream out(dir / frame_name("flow", f, ".bin"), std::ios::binary);
      if (!out) throw FormatError("cannot write flow file");
      for (double v : clip.gt.flow[f].data) put_f32(out, v);
    }
  }
}

Clip read_clip(const fs::path& dir, bool with_gt) {
  Clip clip;
  clip.spec = SceneSpec::from_text(slurp(dir / "spec.txt"));
  const int w = clip.spec.rig.width, h = clip.spec.rig.height;
  const std::size_t npix = static_cast<std::size_t>(w) * h;
  for (int f = 0;; ++f) {
    const fs::path lp = dir / frame_name("left", f, ".png");
    if (!fs::exists(lp)) break;
    auto left = geometry::read_png(lp).gray();
    auto right = geometry::read_png(dir / frame_name("right", f, ".png")).gray();
    if (left.width != w || left.height != h || !right.same_size(left))
      throw DimensionError("clip frame size does not match spec.txt");
    clip.left.push_back(std::move(left));
    clip.right.push_back(std::move(right));
    if (!with_gt) continue;
    const auto dg = geometry::read_pgm16(dir / frame_name("depth", f, ".pgm"));
    if (dg.width != w || dg.height != h) throw DimensionError("depth map size mismatch");
    geometry::DepthMap depth(w, h, 1);
    depth.valid.assign(npix, false);
    for (std::size_t i = 0; i < npix; ++i) {
      depth.data[i] = dg.values[i] / 10.0;
      depth.valid[i] = dg.values[i] > 0;
    }
    clip.gt.depth.push_back(std::move(depth));
    const auto mg = geometry::read_png_raw(dir / frame_name("markers", f, ".png"));
    if (mg.width != w || mg.height != h) throw DimensionError("marker map size mismatch");
    std::vector<int> labels(mg.values.begin(), mg.values.end());
    clip.gt.centers.push_back(marker_centroids(labels, w, clip.spec.markers));
    clip.gt.labels.push_back(std::move(labels));
  }
  if (clip.left.empty()) throw FormatError("no frames in " + dir.string());
  if (with_gt) {
    for (int f = 0; f + 1 < clip.frames(); ++f) {
      const std::string bytes = slurp(dir / frame_name("flow", f, ".bin"));
      if (bytes.size() != npix * 12) throw FormatError("flow file has wrong length");
      geometry::FlowImage flow(w, h, 3);
      flow.valid.assign(npix, true);
      for (std::size_t i = 0; i < npix * 3; ++i) {
        const auto* b = reinterpret_cast<const unsigned char*>(bytes.data()) + 4 * i;
        const std::uint32_t u = b[0] | (b[1] << 8) | (b[2] << 16) | (std::uint32_t(b[3]) << 24);
        flow.data[i] = std::bit_cast<float>(u);
      }
      clip.gt.flow.push_back(std::move(flow));
    }
  }
  clip.spec.frames = clip.frames();
  return clip;
}

}  // namespace sendd::synth
