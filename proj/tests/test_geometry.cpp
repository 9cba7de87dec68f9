// Copyright (c) 2026, The sendd-desk authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "sendd/autodiff/gradcheck.hpp"
#include "sendd/autodiff/ops.hpp"
#include "sendd/autodiff/ops_image.hpp"
#include "sendd/errors.hpp"
#include "sendd/geometry/camera.hpp"
#include "sendd/geometry/image.hpp"
#include "sendd/geometry/image_io.hpp"

using namespace sendd;
using namespace sendd::geometry;

namespace {

CameraRig rig_1000() {
  CameraRig r;
  r.fx = r.fy = 1000;
  r.baseline_mm = 5;
  return r;
}

Image noise_image(int w, int h, std::uint64_t seed, int channels = 1) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> u(0, 255);
  Image img(w, h, channels);
  for (auto& p : img.pixels) p = u(rng) / 255.0;
  return img;
}

std::filesystem::path temp(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("sendd_geom_" + name);
}

}  // namespace

TEST(Camera, DisparityDepth) {
  const auto r = rig_1000();
  EXPECT_DOUBLE_EQ(*disparity_to_depth(50, r), 100.0);
  EXPECT_FALSE(disparity_to_depth(0, r).has_value());
  EXPECT_FALSE(disparity_to_depth(kMinDisparity, r).has_value());
  for (double d : {0.6, 1.0, 7.3, 50.0, 211.0})
    EXPECT_NEAR(*depth_to_disparity(*disparity_to_depth(d, r), r), d, 1e-9);
  double prev = 1e300;
  for (double d = 0.75; d < 300; d *= 1.3) {
    const double z = *disparity_to_depth(d, r);
    EXPECT_LT(z, prev);
    prev = z;
  }
}

TEST(Camera, Backproject) {
  CameraRig r;
  auto p = backproject({r.cx, r.cy}, 10.0, r);
  ASSERT_TRUE(p);
  EXPECT_DOUBLE_EQ(p->x, 0);
  EXPECT_DOUBLE_EQ(p->y, 0);
  EXPECT_DOUBLE_EQ(p->z, 10);

  CameraRig s;
  s.fx = s.fy = 100;
  s.cx = s.cy = 0;
  auto q = backproject({50, 0}, 200.0, s);
  EXPECT_DOUBLE_EQ(q->x, 100);
  EXPECT_DOUBLE_EQ(q->y, 0);
  EXPECT_DOUBLE_EQ(q->z, 200);
  EXPECT_FALSE(backproject({1, 1}, std::nullopt, s));
}

TEST(Camera, ProjectRoundTrip) {
  CameraRig r;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 255), v(0, 191), z(2, 400);
  for (int i = 0; i < 1000; ++i) {
    const Vec2 px{u(rng), v(rng)};
    const auto back = project(*backproject(px, z(rng), r), r);
    ASSERT_TRUE(back);
    EXPECT_NEAR(back->x, px.x, 1e-6);
    EXPECT_NEAR(back->y, px.y, 1e-6);
  }
}

TEST(Camera, Flow3dTo2d) {
  const auto r = rig_1000();
  const Vec3 p{3, -2, 80};
  auto zero = flow3d_to_2d(p, {0, 0, 0}, r);
  EXPECT_DOUBLE_EQ(zero->x, 0);
  EXPECT_DOUBLE_EQ(zero->y, 0);
  auto axial = flow3d_to_2d({0, 0, 80}, {0, 0, 7}, r);
  EXPECT_DOUBLE_EQ(axial->x, 0);
  EXPECT_DOUBLE_EQ(axial->y, 0);
  auto lateral = flow3d_to_2d(p, {2, 0, 0}, r);
  EXPECT_NEAR(lateral->x, 1000 * 2 / 80.0, 1e-12);
  EXPECT_FALSE(flow3d_to_2d({0, 0, 5}, {0, 0, -4.5}, r));
}

TEST(Camera, RigValidationAndText) {
  CameraRig r;
  r.baseline_mm = 0;
  EXPECT_THROW(r.validate(), ParameterError);
  CameraRig a = rig_1000();
  EXPECT_EQ(CameraRig::from_text(a.to_text()), a);
}

TEST(Sampling, BilinearExamples) {
  Image img(2, 2);
  img.at(1, 0) = 1.0;
  img.at(0, 1) = 0.25;
  EXPECT_EQ(*bilinear_sample(img, 1, 0), 1.0);
  EXPECT_EQ(*bilinear_sample(img, 0, 1), 0.25);
  EXPECT_DOUBLE_EQ(*bilinear_sample(img, 0.5, 0), 0.5);
  EXPECT_FALSE(bilinear_sample(img, -0.1, 0));
  EXPECT_FALSE(bilinear_sample(img, 0, 1.5));
}

TEST(Sampling, GradientMatchesFiniteDifferences) {
  const Image img = noise_image(9, 8, 4);
  ad::ParameterStore store;
  ad::Tensor c({6, 2});
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.2, 0.8);
  for (std::size_t i = 0; i < 6; ++i) {
    c[2 * i] = 1 + static_cast<double>(i) + u(rng);
    c[2 * i + 1] = 2 + u(rng) * 4;
  }
  store.add("c", c);
  auto r = ad::finite_diff_check(
      [&](ad::Tape& t, ad::ParamBinding& p) {
        return ad::sum(ad::square(ad::bilinear_sample(t.constant(img.gray_tensor()), p("c"))));
      },
      store, 1e-7);
  EXPECT_LT(r.max_relative_error, 1e-5);
}

TEST(Warp, ZeroFlowIsIdentity) {
  const Image src = noise_image(20, 14, 6);
  FlowImage f(20, 14, 2);
  auto w = inverse_warp(src, f, 20, 14);
  EXPECT_EQ(w.image, src);
  for (bool m : w.mask) EXPECT_TRUE(m);
}

TEST(Warp, ShiftReconstructs) {
  const Image orig = noise_image(30, 10, 7);
  Image shifted(30, 10);
  for (int y = 0; y < 10; ++y)
    for (int x = 3; x < 30; ++x) shifted.at(x, y) = orig.at(x - 3, y);
  FlowImage f(30, 10, 2);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 30; ++x) f.at(x, y, 0) = 3.0;
  auto w = inverse_warp(shifted, f, 30, 10);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 30; ++x) {
      const bool valid = w.mask[y * 30 + x];
      EXPECT_EQ(valid, x + 3 <= 29);
      if (valid) {
        EXPECT_EQ(w.image.at(x, y), orig.at(x, y));
      }
    }
}

TEST(Warp, AllOutside) {
  const Image src = noise_image(8, 8, 8);
  FlowImage f(8, 8, 2, 100.0);
  auto w = inverse_warp(src, f, 8, 8);
  for (bool m : w.mask) EXPECT_FALSE(m);
}

TEST(ImageIo, PngRoundTrip) {
  for (int c : {1, 3}) {
    const Image img = noise_image(13, 7, 9 + c, c);
    const auto p = temp("rt.png");
    write_png(p, img);
    EXPECT_EQ(read_png(p), img);
    std::filesystem::remove(p);
  }
}

TEST(ImageIo, PnmRoundTrip) {
  const Image g = noise_image(11, 5, 20);
  write_image(temp("g.pgm"), g);
  EXPECT_EQ(read_image(temp("g.pgm")), g);
  const Image rgb = noise_image(6, 4, 21, 3);
  write_image(temp("c.ppm"), rgb);
  EXPECT_EQ(read_image(temp("c.ppm")), rgb);
  std::filesystem::remove(temp("g.pgm"));
  std::filesystem::remove(temp("c.ppm"));
}

TEST(ImageIo, Pgm16BigEndian) {
  RawGrid g{3, 2, {0, 1, 256, 65535, 600, 601}};
  const auto p = temp("d.pgm");
  write_pgm16(p, g);
  auto back = read_pgm16(p);
  EXPECT_EQ(back.values, g.values);
  std::ifstream in(p, std::ios::binary);
  std::string all((std::istreambuf_iterator<char>(in)), {});
  EXPECT_EQ(all.rfind("P5", 0), 0u);
  // Samples are stored most significant byte first.
  const auto body = all.substr(all.size() - 12);
  EXPECT_EQ(static_cast<unsigned char>(body[4]), 1u);
  EXPECT_EQ(static_cast<unsigned char>(body[5]), 0u);
  std::filesystem::remove(p);
}

TEST(ImageIo, Png16Raw) {
  RawGrid g{4, 1, {0, 7, 1000, 65535}};
  const auto p = temp("r.png");
  write_png_raw(p, g, 16);
  EXPECT_EQ(read_png_raw(p).values, g.values);
  std::filesystem::remove(p);
}

TEST(ImageIo, Errors) {
  EXPECT_THROW(read_image(temp("missing.png")), FormatError);
  EXPECT_THROW(write_image(temp("x.bmp"), Image(2, 2)), FormatError);
  std::ofstream(temp("bad.png")) << "not a png";
  EXPECT_THROW(read_png(temp("bad.png")), FormatError);
  std::filesystem::remove(temp("bad.png"));
}
