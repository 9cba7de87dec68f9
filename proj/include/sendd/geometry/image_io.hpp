// Copyright (c) 2026, The sendd-desk authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "sendd/geometry/image.hpp"

namespace sendd::geometry {

/// 8-bit gray or RGB PNG; values scaled to [0,1].
Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& img);

/// Raw 8-bit or 16-bit gray label/value grids as PNG (no scaling).
struct RawGrid {
  int width = 0, height = 0;
  std::vector<std::uint16_t> values;
};
RawGrid read_png_raw(const std::filesystem::path& path);
void write_png_raw(const std::filesystem::path& path, const RawGrid& grid, int bit_depth);

/// Binary PGM (P5) or PPM (P6), 8-bit, scaled to [0,1].
Image read_pnm(const std::filesystem::path& path);
void write_pnm(const std::filesystem::path& path, const Image& img);

/// 16-bit binary PGM (big-endian samples, maxval 65535).
RawGrid read_pgm16(const std::filesystem::path& path);
void write_pgm16(const std::filesystem::path& path, const RawGrid& grid);

/// Dispatches on extension (.png, .pgm, .ppm).
Image read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const Image& img);

}  // namespace sendd::geometry
