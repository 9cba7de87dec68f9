// Copyright (c) 2026, The sendd-desk authors
// SPDX-License-Identifier: Apache-2.0
//
// Rectified stereo rig. The left camera is the reference; the right camera is
// displaced by +baseline along x, so a point at depth z appears fx*B/z pixels
// further left in the right image. Invalid conversions return std::nullopt.

#pragma once

#include <filesystem>
#include <optional>
#include <string>

namespace sendd::geometry {

/// Disparities at or below this are treated as invalid (no finite depth).
inline constexpr double kMinDisparity = 0.5;
/// Depths at or below this (mm) are treated as invalid.
inline constexpr double kMinDepth = 1.0;

struct Vec2 {
  double x = 0.0, y = 0.0;
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;
  friend bool operator==(const Vec3&, const Vec3&) = default;
};

struct CameraRig {
  double fx = 200.0, fy = 200.0;
  double cx = 127.5, cy = 95.5;
  double baseline_mm = 6.0;
  int width = 256, height = 192;

  /// Throws ParameterError unless focal lengths, baseline and size are positive.
  void validate() const;
  /// fx * baseline, the disparity-depth product.
  double focal_baseline() const { return fx * baseline_mm; }

  /// key=value text with keys fx, fy, cx, cy, baseline_mm, width, height.
  std::string to_text() const;
  static CameraRig from_text(const std::string& text);
  static CameraRig load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  friend bool operator==(const CameraRig&, const CameraRig&) = default;
};

std::optional<double> disparity_to_depth(double disparity, const CameraRig& rig);
std::optional<double> depth_to_disparity(double depth_mm, const CameraRig& rig);

std::optional<Vec3> backproject(Vec2 pixel, std::optional<double> depth_mm, const CameraRig& rig);
std::optional<Vec2> project(Vec3 point, const CameraRig& rig);

/// Image-plane motion of p3d when displaced by d3d: project(p+d) - project(p).
std::optional<Vec2> flow3d_to_2d(Vec3 p3d, Vec3 d3d, const CameraRig& rig);

}  // namespace sendd::geometry
