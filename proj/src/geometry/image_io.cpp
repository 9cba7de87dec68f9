// Copyright (c) 2026, The sendd-desk authors
// SPDX-License-Identifier: Apache-2.0

#include "sendd/geometry/image_io.hpp"

#include <png.h>

#include <cmath>
#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

#include "sendd/errors.hpp"

namespace sendd::geometry {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw FormatError("cannot open " + path.string());
  return f;
}

std::uint8_t to_u8(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

// Decoded PNG rows: channels is 1 or 3, depth 8 or 16.
struct Decoded {
  int width = 0, height = 0, channels = 1, depth = 8;
  std::vector<std::uint16_t> samples;
};

Decoded decode_png(const std::filesystem::path& path) {
  auto file = open(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) throw FormatError("libpng initialisation failed");
  Decoded out;
  std::vector<png_bytep> rows;
  std::vector<std::uint8_t> buffer;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("corrupt PNG: " + path.string());
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png), png_set_strip_alpha(png);
  if (depth == 16) png_set_swap(png);
  png_read_update_info(png, info);
  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.channels = png_get_channels(png, info);
  out.depth = png_get_bit_depth(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  buffer.resize(rowbytes * out.height);
  rows.resize(out.height);
  for (int y = 0; y < out.height; ++y) rows[y] = buffer.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);
  if (out.channels != 1 && out.channels != 3)
    throw FormatError("unsupported PNG channel count in " + path.string());
  const std::size_t n = static_cast<std::size_t>(out.width) * out.height * out.channels;
  out.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (out.depth == 16) {
      std::uint16_t v;
      std::memcpy(&v, buffer.data() + 2 * i, 2);
      out.samples[i] = v;
    } else {
      out.samples[i] = buffer[i];
    }
  }
  return out;
}

void encode_png(const std::filesystem::path& path, int width, int height, int channels, int depth,
                const std::vector<std::uint16_t>& samples) {
  auto file = open(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) throw FormatError("libpng initialisation failed");
  const std::size_t bps = depth == 16 ? 2 : 1;
  const std::size_t rowbytes = static_cast<std::size_t>(width) * channels * bps;
  std::vector<std::uint8_t> buffer(rowbytes * height);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (depth == 16) {
      buffer[2 * i] = static_cast<std::uint8_t>(samples[i] >> 8);
      buffer[2 * i + 1] = static_cast<std::uint8_t>(samples[i] & 0xff);
    } else {
      buffer[i] = static_cast<std::uint8_t>(samples[i]);
    }
  }
  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y) rows[y] = buffer.data() + y * rowbytes;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw FormatError("PNG encoding failed: " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), depth,
               channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  // No timestamps or text chunks, so identical images give identical files.
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void skip_pnm_space(std::istream& in) {
  while (true) {
    int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      return;
    }
  }
}

struct PnmHeader {
  char kind;
  int width, height, maxval;
};

PnmHeader read_pnm_header(std::istream& in, const std::filesystem::path& path) {
  std::string magic(2, '\0');
  in.read(magic.data(), 2);
  if (magic != "P5" && magic != "P6") throw FormatError("not a binary PGM/PPM: " + path.string());
  PnmHeader h{magic[1], 0, 0, 0};
  skip_pnm_space(in);
  in >> h.width;
  skip_pnm_space(in);
  in >> h.height;
  skip_pnm_space(in);
  in >> h.maxval;
  in.get();
  if (!in || h.width <= 0 || h.height <= 0 || h.maxval <= 0 || h.maxval > 65535)
    throw FormatError("bad PNM header: " + path.string());
  return h;
}

}  // namespace

Image read_png(const std::filesystem::path& path) {
  const auto d = decode_png(path);
  Image img(d.width, d.height, d.channels);
  const double scale = d.depth == 16 ? 65535.0 : 255.0;
  for (std::size_t i = 0; i < d.samples.size(); ++i) img.pixels[i] = d.samples[i] / scale;
  return img;
}

void write_png(const std::filesystem::path& path, const Image& img) {
  std::vector<std::uint16_t> samples(img.pixels.size());
  for (std::size_t i = 0; i < samples.size(); ++i) samples[i] = to_u8(img.pixels[i]);
  encode_png(path, img.width, img.height, img.channels, 8, samples);
}

RawGrid read_png_raw(const std::filesystem::path& path) {
  auto d = decode_png(path);
  if (d.channels != 1) throw FormatError("expected a single-channel PNG: " + path.string());
  return RawGrid{d.width, d.height, std::move(d.samples)};
}

void write_png_raw(const std::filesystem::path& path, const RawGrid& grid, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) throw ParameterError("PNG bit depth must be 8 or 16");
  encode_png(path, grid.width, grid.height, 1, bit_depth, grid.values);
}

Image read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read " + path.string());
  const auto h = read_pnm_header(in, path);
  if (h.maxval > 255) throw FormatError("16-bit PNM: use read_pgm16 for " + path.string());
  const int channels = h.kind == '6' ? 3 : 1;
  Image img(h.width, h.height, channels);
  std::vector<unsigned char> raw(img.pixels.size());
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!in) throw FormatError("truncated PNM: " + path.string());
  for (std::size_t i = 0; i < raw.size(); ++i) img.pixels[i] = raw[i] / static_cast<double>(h.maxval);
  return img;
}

void write_pnm(const std::filesystem::path& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out << (img.channels == 3 ? "P6" : "P5") << "\n" << img.width << " " << img.height << "\n255\n";
  for (double v : img.pixels) out.put(static_cast<char>(to_u8(v)));
}

RawGrid read_pgm16(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read " + path.string());
  const auto h = read_pnm_header(in, path);
  if (h.kind != '5') throw FormatError("expected P5: " + path.string());
  RawGrid g{h.width, h.height, std::vector<std::uint16_t>(static_cast<std::size_t>(h.width) * h.height)};
  const bool wide = h.maxval > 255;
  for (auto& v : g.values) {
    const int hi = in.get();
    if (wide) {
      const int lo = in.get();
      v = static_cast<std::uint16_t>((hi << 8) | lo);
    } else {
      v = static_cast<std::uint16_t>(hi);
    }
  }
  if (!in) throw FormatError("truncated PGM: " + path.string());
  return g;
}

void write_pgm16(const std::filesystem::path& path, const RawGrid& grid) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out << "P5\n" << grid.width << " " << grid.height << "\n65535\n";
  for (auto v : grid.values) {
    out.put(static_cast<char>(v >> 8));
    out.put(static_cast<char>(v & 0xff));
  }
}

Image read_image(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".png") return read_png(path);
  if (ext == ".pgm" || ext == ".ppm") return read_pnm(path);
  throw FormatError("unsupported image extension: " + path.string());
}

void write_image(const std::filesystem::path& path, const Image& img) {
  const auto ext = path.extension().string();
  if (ext == ".png") return write_png(path, img);
  if (ext == ".pgm" || ext == ".ppm") return write_pnm(path, img);
  throw FormatError("unsupported image extension: " + path.string());
}

}  // namespace sendd::geometry
