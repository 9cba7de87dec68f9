// Copyright (c) 2026, The sendd-desk authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "sendd/detect/detector.hpp"

namespace sendd::detect {

struct MatchOptions {
  Mode mode = Mode::Infer;
  double temperature = 0.05;
  bool mutual = true;
};

/// Retained pairs (index in A, index in B) with row-aligned tensors. In train
/// mode pos_b and desc_b are softmax-weighted expectations over the candidates;
/// in infer mode they are the hard nearest neighbour's values.
struct MatchSet {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  ad::Var pos_a, pos_b;    // [M,2]
  ad::Var desc_a, desc_b;  // [M,c]

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
};

/// Nearest descriptor in B for each keypoint of A among candidates within
/// max_px pixels. Keypoints without candidates stay unmatched.
MatchSet match_nn(const KeypointSet& a, const KeypointSet& b, double max_px,
                  const MatchOptions& options);

/// Rectified left/right matching: candidates lie within one row and have
/// disparity u_l - u_r in (0, max_disparity].
MatchSet match_epipolar(const KeypointSet& left, const KeypointSet& right, double max_disparity,
                        const MatchOptions& options);

}  // namespace sendd::detect
