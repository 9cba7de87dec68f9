// Copyright (c) 2026, The sendd-desk authors
// SPDX-License-Identifier: Apache-2.0

#include "sendd/geometry/image.hpp"

#include <algorithm>
#include <cmath>

#include "sendd/errors.hpp"

namespace sendd::geometry {

Image::Image(int w, int h, int c, double fill)
    : width(w), height(h), channels(c), pixels(static_cast<std::size_t>(w) * h * c, fill) {
  if (w <= 0 || h <= 0 || (c != 1 && c != 3)) throw DimensionError("invalid image dimensions");
}

Image Image::gray() const {
  if (channels == 1) return *this;
  Image out(width, height, 1);
  for (int i = 0; i < width * height; ++i) {
    double s = 0.0;
    for (int c = 0; c < channels; ++c) s += pixels[i * channels + c];
    out.pixels[i] = s / channels;
  }
  return out;
}

Image Image::replicate_channels(int c) const {
  const Image g = gray();
  Image out(width, height, c);
  for (int i = 0; i < width * height; ++i)
    for (int k = 0; k < c; ++k) out.pixels[i * c + k] = g.pixels[i];
  return out;
}

ad::Tensor Image::gray_tensor() const {
  const Image g = gray();
  return ad::Tensor({static_cast<std::size_t>(height), static_cast<std::size_t>(width)}, g.pixels);
}

FlowImage::FlowImage(int w, int h, int c, double fill)
    : width(w), height(h), channels(c),
      data(static_cast<std::size_t>(w) * h * c, fill), valid(static_cast<std::size_t>(w) * h, true) {
  if (w <= 0 || h <= 0 || c <= 0) throw DimensionError("invalid flow image dimensions");
}

std::optional<double> bilinear_sample(const Image& img, double x, double y, int channel) {
  if (img.width < 2 || img.height < 2) throw DimensionError("bilinear_sample: image too small");
  if (!(x >= 0.0 && y >= 0.0 && x <= img.width - 1 && y <= img.height - 1)) return std::nullopt;
  const int x0 = std::min(static_cast<int>(x), img.width - 2);
  const int y0 = std::min(static_cast<int>(y), img.height - 2);
  const double fx = x - x0, fy = y - y0;
  const double v00 = img.at(x0, y0, channel), v01 = img.at(x0 + 1, y0, channel);
  const double v10 = img.at(x0, y0 + 1, channel), v11 = img.at(x0 + 1, y0 + 1, channel);
  return (1 - fy) * ((1 - fx) * v00 + fx * v01) + fy * ((1 - fx) * v10 + fx * v11);
}

namespace {

// Flow value at a target pixel, upsampling coarse grids bilinearly with clamping.
double flow_at(const FlowImage& f, int px, int py, int c, bool& valid) {
  if (f.stride == 1.0 && f.offset == 0.0) {
    valid = f.valid.empty() || f.valid[py * f.width + px];
    return f.at(px, py, c);
  }
  const double gx = std::clamp((px - f.offset) / f.stride, 0.0, f.width - 1.0);
  const double gy = std::clamp((py - f.offset) / f.stride, 0.0, f.height - 1.0);
  const int x0 = std::min(static_cast<int>(gx), std::max(f.width - 2, 0));
  const int y0 = std::min(static_cast<int>(gy), std::max(f.height - 2, 0));
  const int x1 = std::min(x0 + 1, f.width - 1), y1 = std::min(y0 + 1, f.height - 1);
  const double fx = gx - x0, fy = gy - y0;
  valid = true;
  if (!f.valid.empty())
    for (int yy : {y0, y1})
      for (int xx : {x0, x1}) valid = valid && f.valid[yy * f.width + xx];
  return (1 - fy) * ((1 - fx) * f.at(x0, y0, c) + fx * f.at(x1, y0, c)) +
         fy * ((1 - fx) * f.at(x0, y1, c) + fx * f.at(x1, y1, c));
}

}  // namespace

WarpResult inverse_warp(const Image& src, const FlowImage& flow2d, int target_width,
                        int target_height) {
  if (flow2d.channels < 2) throw DimensionError("inverse_warp needs 2D flow");
  if (flow2d.stride == 1.0 && flow2d.offset == 0.0 &&
      (flow2d.width != target_width || flow2d.height != target_height))
    throw DimensionError("inverse_warp: flow grid does not match the target grid");
  WarpResult out{Image(target_width, target_height, src.channels),
                 std::vector<bool>(static_cast<std::size_t>(target_width) * target_height, false)};
  for (int y = 0; y < target_height; ++y) {
    for (int x = 0; x < target_width; ++x) {
      bool fvalid = true;
      const double u = x + flow_at(flow2d, x, y, 0, fvalid);
      const double v = y + flow_at(flow2d, x, y, 1, fvalid);
      if (!fvalid) continue;
      bool ok = true;
      for (int c = 0; c < src.channels && ok; ++c) {
        const auto s = bilinear_sample(src, u, v, c);
        if (!s) ok = false;
        else out.image.at(x, y, c) = *s;
      }
      if (!ok)
        for (int c = 0; c < src.channels; ++c) out.image.at(x, y, c) = 0.0;
      out.mask[y * target_width + x] = ok;
    }
  }
  return out;
}

}  // namespace sendd::geometry
