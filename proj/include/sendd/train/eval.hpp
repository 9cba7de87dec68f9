// Copyright (c) 2026, The sendd-desk authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "sendd/geometry/camera.hpp"
#include "sendd/synth/scene.hpp"

namespace sendd::train {

using geometry::Vec2;
using geometry::Vec3;

struct EndpointErrors {
  std::vector<double> errors;        // one per marker present in both
  std::vector<std::size_t> markers;  // marker index of each error
  std::size_t missing = 0;           // markers absent from either side
};

EndpointErrors endpoint_error(std::span<const std::optional<Vec2>> pred,
                              std::span<const std::optional<Vec2>> gt);
EndpointErrors endpoint_error(std::span<const std::optional<Vec3>> pred,
                              std::span<const std::optional<Vec3>> gt);

/// Mean of nearest-neighbour distances A->B and B->A, averaged. Throws
/// ContractError if either set is empty.
double chamfer_distance(std::span<const Vec2> a, std::span<const Vec2> b);

struct Aggregate {
  std::size_t count = 0;
  double mean = 0.0, sem = 0.0, median = 0.0;
};
/// Mean, standard error (sample sd / sqrt(n); 0 for n < 2) and median.
Aggregate aggregate(std::span<const double> values);

/// Track queries derived from the first frame's marker masks.
struct Query {
  std::size_t id = 0;
  Vec2 uv;
  int marker = 0;     // 1-based label
  bool center = false;  // centroid query, otherwise a mask pixel
};

/// One centroid query per visible marker followed by every mask pixel.
std::vector<Query> marker_queries(const std::vector<int>& labels, int width, int markers);
void write_queries_csv(std::ostream& out, const std::vector<Query>& queries);
std::vector<Query> read_queries_csv(const std::filesystem::path& path);

/// Rows of a track CSV.
struct TrackRow {
  std::size_t query = 0;
  int frame = 0;
  Vec2 uv;
  Vec3 xyz;
  bool valid = false;
};
std::vector<TrackRow> read_track_csv(const std::filesystem::path& path);

struct MarkerError {
  int frame = 0;
  double length_s = 0.0;
  int marker = 0;
  std::optional<double> epe_px, epe_mm, chamfer_px;
};

struct ClipEval {
  std::string name;
  int frames = 0;
  double length_s = 0.0;
  std::vector<MarkerError> markers;  // every evaluated frame > 0
  /// Means over markers at the last tracked frame.
  std::optional<double> epe_px, epe_mm, chamfer_px;
  std::size_t missing = 0;
};

/// Compares tracks against the clip's ground truth at each tracked frame.
ClipEval evaluate_clip(const std::string& name, const synth::Clip& clip,
                       const std::vector<Query>& queries, const std::vector<TrackRow>& tracks);

struct CurvePoint {
  double length_s = 0.0;
  Aggregate epe_px, epe_mm, chamfer_px;
};

struct EvalReport {
  std::vector<ClipEval> clips;
  Aggregate epe_px, epe_mm, chamfer_px;  // over per-clip values
  std::size_t missing = 0;
  std::vector<CurvePoint> curve;  // per 1-s clip-length bucket

  void write_clips_csv(std::ostream& out) const;
  void write_markers_csv(std::ostream& out) const;
  void write_curve_csv(std::ostream& out) const;
  void write_summary(std::ostream& out) const;
};

/// Aggregates and clip-length curve from per-clip evaluations. A marker
/// error at frame f falls in bucket ceil(f / fps) seconds.
EvalReport build_report(std::vector<ClipEval> clips);

/// Queries and tracks that coincide with the ground truth: centre queries sit
/// on the GT centroid and its 3D point, mask queries cover each frame's mask.
struct OracleTracks {
  std::vector<Query> queries;
  std::vector<TrackRow> rows;
};
OracleTracks ground_truth_tracks(const synth::Clip& clip);

}  // namespace sendd::train
