// Copyright (c) 2026, The sendd-desk authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <ostream>
#include <vector>

#include "sendd/autodiff/parameters.hpp"
#include "sendd/geometry/image.hpp"
#include "sendd/model/model.hpp"

namespace sendd::detect {

enum class Mode { Train, Infer };

struct KeypointSet {
  ad::Var positions;    // [N,2] (u, v) pixels
  std::vector<double> scores;
  ad::Var descriptors;  // [N,c], unit rows; empty until describe()
  std::vector<std::size_t> cell_index;

  std::size_t size() const { return cell_index.size(); }
};

/// Per-image standardised grayscale as an [H,W] constant on the tape.
ad::Var prepare_image(ad::Tape& tape, const geometry::Image& img);

/// Detector logits [H,W] for a prepared image.
ad::Var detector_logits(ad::ParamBinding& params, const ad::Var& gray);

/// One keypoint per cell in row-major cell order. Train mode gives the
/// per-cell soft-argmax, infer mode the argmax pixel (ties to the lower index).
KeypointSet detect(ad::ParamBinding& params, const ad::Var& gray, Mode mode,
                   const model::ModelConfig& config);

/// Fills descriptors: bilinear patch around each keypoint (zero outside the
/// image) joined with an encoding of the sub-pixel offset, two layers, unit norm.
void describe(ad::ParamBinding& params, const ad::Var& gray, KeypointSet& keypoints,
              const model::ModelConfig& config);

/// frame,cell,u,v,score rows; header written when requested.
void write_keypoints_csv(std::ostream& out, int frame, const KeypointSet& keypoints,
                         bool header);

}  // namespace sendd::detect
