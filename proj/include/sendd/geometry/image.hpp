// Copyright (c) 2026, The sendd-desk authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <vector>

#include "sendd/autodiff/tensor.hpp"

namespace sendd::geometry {

/// Row-major interleaved pixels in [0,1]; 1 or 3 channels.
struct Image {
  int width = 0, height = 0, channels = 1;
  std::vector<double> pixels;

  Image() = default;
  Image(int w, int h, int c = 1, double fill = 0.0);

  double& at(int x, int y, int c = 0) { return pixels[(y * width + x) * channels + c]; }
  double at(int x, int y, int c = 0) const { return pixels[(y * width + x) * channels + c]; }
  bool same_size(const Image& o) const { return width == o.width && height == o.height; }

  /// Channel mean as a single-channel image.
  Image gray() const;
  Image replicate_channels(int c) const;
  /// [H,W] tensor of the grayscale image.
  ad::Tensor gray_tensor() const;

  friend bool operator==(const Image&, const Image&) = default;
};

/// Dense per-pixel 2D or 3D vectors, optionally sampled on a coarse grid whose
/// sample (i,j) sits at pixel (offset + stride*j, offset + stride*i).
struct FlowImage {
  int width = 0, height = 0, channels = 2;
  double stride = 1.0, offset = 0.0;
  std::vector<double> data;
  std::vector<bool> valid;

  FlowImage() = default;
  FlowImage(int w, int h, int c, double fill = 0.0);
  double& at(int x, int y, int c) { return data[(y * width + x) * channels + c]; }
  double at(int x, int y, int c) const { return data[(y * width + x) * channels + c]; }
};

/// Per-pixel depth in mm with a validity mask. Same grid conventions as FlowImage.
using DepthMap = FlowImage;

/// Bilinear value at real pixel coordinates; nullopt outside [0,W-1]x[0,H-1].
std::optional<double> bilinear_sample(const Image& img, double x, double y, int channel = 0);

struct WarpResult {
  Image image;
  std::vector<bool> mask;
};

/// out(p) = src(p + flow(p)). Flow may be coarse (stride > 1); it is
/// bilinearly upsampled to the target grid first. Pixels sampled outside src
/// are zero and masked false.
WarpResult inverse_warp(const Image& src, const FlowImage& flow2d, int target_width,
                        int target_height);

}  // namespace sendd::geometry
