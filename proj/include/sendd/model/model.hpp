// Copyright (c) 2026, The sendd-desk authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "sendd/autodiff/parameters.hpp"

namespace sendd::model {

struct ModelConfig {
  std::size_t channels = 64;
  std::size_t bands = 6;
  std::size_t k = 4;
  std::vector<std::size_t> dilations{1, 8, 8, 1};
  std::size_t cell = 32;
  std::size_t detector_channels = 8;
  std::size_t patch = 16;
  double match_radius_px = 256.0;
  bool mutual_check = true;
  double match_temperature = 0.05;
  double detect_temperature = 1.0;
  /// Training soft-argmax window radius around the cell maximum, px (0: whole cell).
  std::size_t detect_window = 2;
  /// Search band is width / ratio.
  double disparity_ratio = 6.67;
  /// Nominal working depth and spatial scale used to normalise 3D encodings.
  double depth_ref_mm = 60.0;
  double position_scale_mm = 20.0;
  /// Flow head output unit.
  double flow_scale_mm = 5.0;
  /// Final detector layer gain; large values make the per-cell softmax peaky.
  double detector_gain = 4.0;
  std::uint64_t seed = 1;

  double max_disparity(int width) const { return width / disparity_ratio; }

  /// Throws ParameterError on a structurally invalid configuration.
  void validate() const;

  std::string to_text() const;
  /// Applies key=value lines on top of the defaults.
  static ModelConfig from_text(const std::string& text);
};

/// Names of parameters carrying configuration rather than weights.
inline bool is_metadata(const std::string& name) { return name.rfind("__", 0) == 0; }

/// Fresh weights for every module, plus __config entries that pin c, k, bands
/// and the detector width for later compatibility checks.
ad::ParameterStore init_parameters(const ModelConfig& config);

/// Throws ParameterError when the store was built for a different c, k,
/// band count or layer layout.
void check_compatible(const ModelConfig& config, const ad::ParameterStore& params);

/// Reads the __config entries back; fields without an entry keep defaults.
ModelConfig config_from_parameters(const ad::ParameterStore& params);

/// Copy without optimiser state (Adam moments, step counter).
ad::ParameterStore weights_only(const ad::ParameterStore& params);

}  // namespace sendd::model
