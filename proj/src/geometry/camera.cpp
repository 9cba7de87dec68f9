// Copyright (c) 2026, The sendd-desk authors
// SPDX-License-Identifier: Apache-2.0

#include "sendd/geometry/camera.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "sendd/errors.hpp"

namespace sendd::geometry {

void CameraRig::validate() const {
  if (!(fx > 0 && fy > 0)) throw ParameterError("camera focal lengths must be positive");
  if (!(baseline_mm > 0)) throw ParameterError("stereo baseline must be positive");
  if (width <= 0 || height <= 0) throw ParameterError("image size must be positive");
}

std::string CameraRig::to_text() const {
  std::ostringstream os;
  os.precision(17);
  os << "fx=" << fx << "\nfy=" << fy << "\ncx=" << cx << "\ncy=" << cy
     << "\nbaseline_mm=" << baseline_mm << "\nwidth=" << width << "\nheight=" << height << "\n";
  return os.str();
}

CameraRig CameraRig::from_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("camera file line without '=': " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto num = [&kv](const char* key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw FormatError(std::string("camera file missing key ") + key);
    return std::stod(it->second);
  };
  CameraRig rig;
  rig.fx = num("fx");
  rig.fy = num("fy");
  rig.cx = num("cx");
  rig.cy = num("cy");
  rig.baseline_mm = num("baseline_mm");
  rig.width = static_cast<int>(num("width"));
  rig.height = static_cast<int>(num("height"));
  rig.validate();
  return rig;
}

CameraRig CameraRig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str());
}

void CameraRig::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << to_text();
}

std::optional<double> disparity_to_depth(double disparity, const CameraRig& rig) {
  if (!(disparity > kMinDisparity)) return std::nullopt;
  return rig.focal_baseline() / disparity;
}

std::optional<double> depth_to_disparity(double depth_mm, const CameraRig& rig) {
  if (!(depth_mm > kMinDepth)) return std::nullopt;
  return rig.focal_baseline() / depth_mm;
}

std::optional<Vec3> backproject(Vec2 pixel, std::optional<double> depth_mm, const CameraRig& rig) {
  if (!depth_mm || !(*depth_mm > kMinDepth)) return std::nullopt;
  const double z = *depth_mm;
  return Vec3{(pixel.x - rig.cx) * z / rig.fx, (pixel.y - rig.cy) * z / rig.fy, z};
}

std::optional<Vec2> project(Vec3 p, const CameraRig& rig) {
  if (!(p.z > kMinDepth)) return std::nullopt;
  return Vec2{rig.fx * p.x / p.z + rig.cx, rig.fy * p.y / p.z + rig.cy};
}

std::optional<Vec2> flow3d_to_2d(Vec3 p3d, Vec3 d3d, const CameraRig& rig) {
  const auto a = project(p3d, rig);
  const auto b = project(Vec3{p3d.x + d3d.x, p3d.y + d3d.y, p3d.z + d3d.z}, rig);
  if (!a || !b) return std::nullopt;
  return Vec2{b->x - a->x, b->y - a->y};
}

}  // namespace sendd::geometry
