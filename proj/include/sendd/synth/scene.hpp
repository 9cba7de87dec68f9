// Copyright (c) 2026, The sendd-desk authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sendd/geometry/camera.hpp"
#include "sendd/geometry/image.hpp"

namespace sendd::synth {

enum class Surface { Plane, Sine };
enum class Motion { None, Rigid, Deform };

struct SceneSpec {
  std::uint64_t seed = 1;
  geometry::CameraRig rig;
  int octaves = 4;
  /// Lattice period of the coarsest texture octave, in pixels at depth_mm.
  double texture_period_px = 40.0;
  Surface surface = Surface::Plane;
  double depth_mm = 60.0;
  double sine_amplitude_mm = 3.0;
  double sine_period_mm = 40.0;
  Motion motion = Motion::None;
  /// Rigid translation per frame (mm); also added under Deform.
  geometry::Vec3 velocity_mm{};
  double deform_amplitude_mm = 1.5;
  double deform_period_s = 4.0;
  int markers = 6;
  double marker_radius_px = 5.0;
  int frames = 10;
  double fps = 5.0;
  int stride = 1;

  /// Throws ParameterError; depths at or below the minimum depth included.
  void validate() const;
  std::string to_text() const;
  static SceneSpec from_text(const std::string& text);
};

struct GroundTruth {
  std::vector<geometry::DepthMap> depth;  // per frame, mm
  std::vector<geometry::FlowImage> flow;  // frame t -> t+1, 3 channels, mm
  std::vector<std::vector<int>> labels;   // per frame, 0 background, marker m is m+1
  /// Per frame and marker: centroid of the marker's mask, if visible.
  std::vector<std::vector<std::optional<geometry::Vec2>>> centers;
};

struct Clip {
  SceneSpec spec;
  std::vector<geometry::Image> left, right;  // single-channel, 8-bit levels
  GroundTruth gt;

  int frames() const { return static_cast<int>(left.size()); }
};

/// Renders the clip; deterministic per spec. Ground truth is skipped when
/// not requested (training corpora do not need it).
Clip generate_clip(const SceneSpec& spec, bool with_ground_truth = true);

/// Mask centroids per marker label (1..markers).
std::vector<std::optional<geometry::Vec2>> marker_centroids(const std::vector<int>& labels,
                                                            int width, int markers);

struct ValidationReport {
  double stereo_rmse = 0.0;
  double temporal_rmse = 0.0;  // worst consecutive pair
  double texture_std = 0.0;
  bool degenerate_texture = false;
  bool passed = false;
  std::string message;
};

inline constexpr double kConsistencyRmse = 0.02;

/// Left vs right resampled by the true disparity, and frame t vs t+1
/// resampled by the induced 2D flow, on interior pixels.
ValidationReport validate_scene(const Clip& clip);

/// left_####.png, right_####.png (gray replicated to RGB), depth_####.pgm
/// (16-bit, 0.1 mm), flow_####.bin (LE f32 triples), markers_####.png, spec.txt.
void write_clip(const Clip& clip, const std::filesystem::path& dir);
Clip read_clip(const std::filesystem::path& dir, bool with_ground_truth = true);

std::string frame_name(const std::string& stem, int frame, const std::string& ext);

}  // namespace sendd::synth
