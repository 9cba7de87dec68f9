// Copyright (c) 2026, The sendd-desk authors
// SPDX-License-Identifier: Apache-2.0
//
// Detect -> stereo nodes -> flow nodes -> per-query interpolation. The node
// stages run once per frame or pair; only the interpolation depends on the
// query count.
#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "sendd/autodiff/parameters.hpp"
#include "sendd/detect/matching.hpp"
#include "sendd/geometry/camera.hpp"
#include "sendd/geometry/image.hpp"
#include "sendd/gnn/gat.hpp"
#include "sendd/losses/losses.hpp"
#include "sendd/model/model.hpp"

namespace sendd::pipeline {

using geometry::Vec2;
using geometry::Vec3;

/// Spacing and first-sample offset of the dense query grid used by the losses.
inline constexpr std::size_t kGridStride = 8;
inline constexpr double kGridOffset = 3.5;

struct Model {
  ad::ParameterStore params;
  model::ModelConfig config;
};

/// Loads weights, reads their config and checks it against the store.
/// Throws FormatError / ParameterError.
Model load_model(const std::filesystem::path& path);

// ---- tape-level stages (shared by training and inference) ----

struct FrameKeypoints {
  detect::KeypointSet left, right;
};

FrameKeypoints detect_frame(ad::ParamBinding& params, const model::ModelConfig& config,
                            const geometry::Image& left, const geometry::Image& right,
                            detect::Mode mode);

struct StereoStage {
  detect::MatchSet matches;
  gnn::InterpolationNodes nodes;
  double width = 0, height = 0, max_disparity = 0;
  bool ok = false;
  std::string diagnostic;
};

StereoStage stereo_stage(ad::ParamBinding& params, const model::ModelConfig& config,
                         const FrameKeypoints& keypoints, int width, int height,
                         detect::Mode mode);

/// Disparity [Q,1] in pixels at pixel queries [Q,2].
ad::Var query_disparity(ad::ParamBinding& params, const model::ModelConfig& config,
                        const StereoStage& stage, const ad::Var& queries);

struct FlowStage {
  detect::MatchSet matches;
  ad::Var points_a, points_b;  // [M,3] mm
  gnn::InterpolationNodes nodes;
  bool ok = false;
  std::string diagnostic;
};

/// Matches left keypoints of frame a to frame b, lifts both ends to 3D with
/// disparity interpolated at the matched points, and refines in 3D.
FlowStage flow_stage(ad::ParamBinding& params, const model::ModelConfig& config,
                     const geometry::CameraRig& rig, const FrameKeypoints& a,
                     const StereoStage& stereo_a, const FrameKeypoints& b,
                     const StereoStage& stereo_b, detect::Mode mode);

/// 3D flow [Q,3] mm at 3D queries [Q,3].
ad::Var query_flow(ad::ParamBinding& params, const model::ModelConfig& config,
                   const FlowStage& stage, const ad::Var& queries3d);

/// uv [M,2] and depth [M,1] -> points [M,3].
ad::Var backproject_points(const ad::Var& uv, const ad::Var& depth, const geometry::CameraRig& rig);
/// points [M,3] -> uv [M,2]; depth floored at the minimum depth.
ad::Var project_points(const ad::Var& points, const geometry::CameraRig& rig);

/// Pixel centres of the loss grid, [(H/8)(W/8), 2] row-major.
ad::Tensor grid_queries(int width, int height);

/// One training pair: stereo frames t and t+skip (single-channel images).
struct TrainingSample {
  const geometry::Image* left_t = nullptr;
  const geometry::Image* right_t = nullptr;
  const geometry::Image* left_next = nullptr;
  const geometry::Image* right_next = nullptr;
};

/// Loss terms of one pair on the binding's tape; nullopt when a stage lacks
/// matches or a photometric mask is empty.
std::optional<losses::LossTerms> training_losses(ad::ParamBinding& params,
                                                 const model::ModelConfig& config,
                                                 const geometry::CameraRig& rig,
                                                 const TrainingSample& sample,
                                                 const losses::LossWeights& weights);

// ---- inference on plain tensors ----

struct KeypointTensors {
  ad::Tensor positions, descriptors;
  std::vector<double> scores;
  std::vector<std::size_t> cells;
};

/// Detection and description of one stereo frame.
struct FrameFeatures {
  int frame = -1;
  KeypointTensors left, right;
};

/// Refined nodes with interpolation keys and values; the node stage result.
struct NodeTensors {
  ad::Tensor keys, values;
  std::vector<double> points;
  std::size_t dim = 0;
  std::size_t matches = 0;
  bool ok = false;
  std::string diagnostic;
};

FrameFeatures describe_frame(const Model& model, const geometry::Image& left,
                             const geometry::Image& right, int frame = -1);
NodeTensors stereo_nodes(const Model& model, const FrameFeatures& frame, int width, int height);
NodeTensors flow_nodes(const Model& model, const geometry::CameraRig& rig, const FrameFeatures& a,
                       const NodeTensors& stereo_a, const FrameFeatures& b,
                       const NodeTensors& stereo_b);

struct QueryEstimate {
  std::vector<std::optional<double>> disparity;  // px
  std::vector<std::optional<double>> depth;      // mm
  std::vector<std::optional<Vec3>> points;       // mm
  std::vector<std::optional<Vec3>> flow3d;       // mm
  std::vector<std::optional<Vec2>> flow2d;       // px
};

/// Disparity and depth at the queries from the stereo nodes. Queries outside
/// the image or with disparity at or below the minimum are invalid.
QueryEstimate interpolate_depth(const Model& model, const geometry::CameraRig& rig,
                                const NodeTensors& stereo, std::span<const Vec2> queries);
/// Adds 3D and induced 2D flow to a depth estimate.
void interpolate_motion(const Model& model, const geometry::CameraRig& rig,
                        const NodeTensors& flow, QueryEstimate& estimate);

struct DepthResult {
  std::vector<std::optional<double>> depth;
  std::string diagnostic;
};
DepthResult estimate_depth(const Model& model, const geometry::CameraRig& rig,
                           const geometry::Image& left, const geometry::Image& right,
                           std::span<const Vec2> queries);

struct FlowResult {
  QueryEstimate estimate;
  std::string diagnostic;
};
FlowResult estimate_flow(const Model& model, const geometry::CameraRig& rig,
                         const geometry::Image& left_t, const geometry::Image& right_t,
                         const geometry::Image& left_next, const geometry::Image& right_next,
                         std::span<const Vec2> queries);

/// Features and stereo nodes of one frame, as kept by the streaming cache.
struct FrameState {
  FrameFeatures features;
  NodeTensors stereo;
};

/// Keeps the most recent frame. A request for another frame id recomputes.
class FeatureCache {
 public:
  explicit FeatureCache(bool enabled) : enabled_(enabled) {}
  FrameState get(const Model& model, int frame, const geometry::Image& left,
                 const geometry::Image& right);
  std::size_t computations() const { return computations_; }
  std::size_t hits() const { return hits_; }

 private:
  bool enabled_;
  std::optional<FrameState> last_;
  std::size_t computations_ = 0, hits_ = 0;
};

struct TrackOptions {
  int stride = 1;
  bool cache = true;
};

struct TrackResult {
  std::vector<int> frames;                  // chained frame ids
  std::vector<std::vector<Vec2>> uv;        // [frame][query]
  std::vector<std::vector<Vec3>> xyz;       // [frame][query], mm
  std::vector<std::vector<bool>> valid;     // [frame][query]
  std::vector<std::vector<double>> disparity;  // [frame][query], px
  std::vector<std::vector<Vec3>> flow3d;    // [pair][query], mm
  std::vector<std::string> diagnostics;
  std::size_t detect_invocations = 0;
  std::size_t cache_hits = 0;

  std::size_t queries() const { return uv.empty() ? 0 : uv.front().size(); }
  /// query_id,frame,u,v,x_mm,y_mm,z_mm,valid
  void write_csv(std::ostream& out) const;
};

/// Chains pairs (i, i+stride) from frame 0, advancing queries by the induced
/// 2D flow. A query that becomes invalid stays invalid.
TrackResult track_sequence(const Model& model, const geometry::CameraRig& rig,
                           std::span<const geometry::Image> left,
                           std::span<const geometry::Image> right, std::span<const Vec2> queries,
                           const TrackOptions& options);

/// RGB copy of the image with valid tracked points of one chained frame marked.
geometry::Image overlay_tracks(const geometry::Image& image, const TrackResult& result,
                               std::size_t frame_index);

}  // namespace sendd::pipeline
