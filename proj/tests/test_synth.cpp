// Copyright (c) 2026, The sendd-desk authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "sendd/errors.hpp"
#include "sendd/geometry/camera.hpp"
#include "sendd/geometry/image_io.hpp"
#include "sendd/synth/scene.hpp"

using namespace sendd;
using namespace sendd::synth;

namespace {

SceneSpec plane_100() {
  SceneSpec s;
  s.rig.fx = s.rig.fy = 1000;
  s.rig.baseline_mm = 5;
  s.depth_mm = 100;
  s.frames = 2;
  s.markers = 0;
  return s;
}

std::filesystem::path fresh_dir(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / ("sendd_synth_" + name);
  std::filesystem::remove_all(d);
  return d;
}

}  // namespace

TEST(Synth, PlaneDisparity) {
  const auto s = plane_100();
  const auto clip = generate_clip(s);
  ASSERT_EQ(clip.frames(), 2);
  for (double z : clip.gt.depth[0].data) EXPECT_NEAR(z, 100.0, 1e-9);
  EXPECT_NEAR(*geometry::depth_to_disparity(100.0, s.rig), 50.0, 1e-12);
  // Integer disparity: the right view is the left view shifted by 50 px.
  for (int y = 0; y < s.rig.height; ++y)
    for (int x = 50; x < s.rig.width; ++x)
      ASSERT_NEAR(clip.right[0].at(x - 50, y), clip.left[0].at(x, y), 1.0 / 255 + 1e-12);
  EXPECT_TRUE(validate_scene(clip).passed);
}

TEST(Synth, ZeroMotion) {
  auto s = plane_100();
  s.frames = 4;
  s.surface = Surface::Sine;
  const auto clip = generate_clip(s);
  for (int f = 1; f < 4; ++f) {
    EXPECT_EQ(clip.left[f], clip.left[0]);
    EXPECT_EQ(clip.right[f], clip.right[0]);
  }
  for (const auto& fl : clip.gt.flow)
    for (double v : fl.data) EXPECT_EQ(v, 0.0);
}

TEST(Synth, RigidTranslationFlow) {
  auto s = plane_100();
  s.motion = Motion::Rigid;
  s.velocity_mm = {2, 0, 0};
  const auto clip = generate_clip(s);
  const auto& fl = clip.gt.flow[0];
  for (int y = 0; y < s.rig.height; y += 7)
    for (int x = 0; x < s.rig.width; x += 7) {
      EXPECT_NEAR(fl.at(x, y, 0), 2.0, 1e-9);
      const auto p = geometry::backproject({double(x), double(y)}, 100.0, s.rig);
      const auto f2 = geometry::flow3d_to_2d(*p, {fl.at(x, y, 0), fl.at(x, y, 1), fl.at(x, y, 2)},
                                             s.rig);
      EXPECT_NEAR(f2->x, 20.0, 1e-9);
      EXPECT_NEAR(f2->y, 0.0, 1e-9);
    }
  for (int y = 0; y < s.rig.height; ++y)
    for (int x = 0; x + 20 < s.rig.width; ++x)
      ASSERT_NEAR(clip.left[1].at(x + 20, y), clip.left[0].at(x, y), 1.0 / 255 + 1e-12);
}

TEST(Synth, SeedDeterminism) {
  SceneSpec s;
  s.seed = 77;
  s.surface = Surface::Sine;
  s.motion = Motion::Deform;
  s.frames = 3;
  const auto a = generate_clip(s), b = generate_clip(s);
  EXPECT_EQ(a.left, b.left);
  EXPECT_EQ(a.right, b.right);
  EXPECT_EQ(a.gt.labels, b.gt.labels);
  s.seed = 78;
  EXPECT_FALSE(generate_clip(s).left[0] == a.left[0]);
}

TEST(Synth, GeneratedClipsValidate) {
  for (auto motion : {Motion::None, Motion::Rigid, Motion::Deform})
    for (auto surface : {Surface::Plane, Surface::Sine}) {
      SceneSpec s;
      s.seed = 5 + static_cast<int>(motion) * 2 + static_cast<int>(surface);
      s.surface = surface;
      s.motion = motion;
      s.velocity_mm = {0.8, -0.4, 0.3};
      s.frames = 3;
      const auto r = validate_scene(generate_clip(s));
      EXPECT_TRUE(r.passed) << r.message << " stereo " << r.stereo_rmse << " temporal "
                            << r.temporal_rmse;
    }
}

TEST(Synth, CorruptedDisparityFails) {
  SceneSpec s;
  s.surface = Surface::Sine;
  s.frames = 2;
  auto clip = generate_clip(s);
  for (auto& d : clip.gt.depth)
    for (auto& z : d.data) z /= 1.1;  // disparity x1.1
  const auto r = validate_scene(clip);
  EXPECT_FALSE(r.passed);
  EXPECT_GE(r.stereo_rmse, kConsistencyRmse);
}

TEST(Synth, ZeroTextureFlagged) {
  SceneSpec s;
  s.octaves = 0;
  s.markers = 0;
  s.frames = 2;
  const auto r = validate_scene(generate_clip(s));
  EXPECT_TRUE(r.degenerate_texture);
  EXPECT_FALSE(r.passed);
}

TEST(Synth, MarkerCentroids) {
  SceneSpec s;
  s.markers = 8;
  s.motion = Motion::Deform;
  s.surface = Surface::Sine;
  s.frames = 3;
  const auto clip = generate_clip(s);
  const int w = s.rig.width;
  for (int f = 0; f < clip.frames(); ++f) {
    const auto& labels = clip.gt.labels[f];
    for (int m = 0; m < s.markers; ++m) {
      double sx = 0, sy = 0;
      long n = 0;
      for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == m + 1) {
          sx += static_cast<double>(i % w);
          sy += static_cast<double>(i / w);
          ++n;
        }
      const auto& c = clip.gt.centers[f][m];
      ASSERT_EQ(c.has_value(), n > 0);
      if (!c) continue;
      EXPECT_LT(std::hypot(c->x - sx / n, c->y - sy / n), 0.1);
    }
  }
}

TEST(Synth, SpecErrors) {
  SceneSpec s;
  s.depth_mm = 0.5;
  EXPECT_THROW(generate_clip(s), ParameterError);
  s = {};
  s.surface = Surface::Sine;
  s.depth_mm = 3.0;
  s.sine_amplitude_mm = 2.5;
  EXPECT_THROW(s.validate(), ParameterError);
  s = {};
  s.frames = 0;
  EXPECT_THROW(s.validate(), ParameterError);
}

TEST(Synth, SpecTextRoundTrip) {
  SceneSpec s;
  s.seed = 9;
  s.surface = Surface::Sine;
  s.motion = Motion::Rigid;
  s.velocity_mm = {0.25, -1.5, 0.125};
  s.markers = 3;
  const auto back = SceneSpec::from_text(s.to_text());
  EXPECT_EQ(back.to_text(), s.to_text());
  EXPECT_THROW(SceneSpec::from_text("bogus=1\n"), ParameterError);
}

TEST(ClipIo, Layout) {
  SceneSpec s;
  s.frames = 2;
  s.markers = 2;
  s.motion = Motion::Rigid;
  s.velocity_mm = {0.5, 0, 0};
  const auto clip = generate_clip(s);
  const auto dir = fresh_dir("layout");
  write_clip(clip, dir);
  for (const char* f : {"spec.txt", "left_0000.png", "right_0001.png", "depth_0000.pgm",
                        "markers_0001.png", "flow_0000.bin"})
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  EXPECT_FALSE(std::filesystem::exists(dir / "flow_0001.bin"));
  EXPECT_EQ(std::filesystem::file_size(dir / "flow_0000.bin"),
            static_cast<std::uintmax_t>(s.rig.width) * s.rig.height * 3 * 4);
  EXPECT_EQ(frame_name("left", 7, ".png"), "left_0007.png");

  const auto depth = geometry::read_pgm16(dir / "depth_0000.pgm");
  EXPECT_EQ(depth.values[0], static_cast<std::uint16_t>(std::lround(clip.gt.depth[0].data[0] * 10)));

  std::ifstream fin(dir / "flow_0000.bin", std::ios::binary);
  unsigned char b[4];
  fin.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t bits = b[0] | b[1] << 8 | b[2] << 16 | std::uint32_t(b[3]) << 24;
  EXPECT_EQ(std::bit_cast<float>(bits), static_cast<float>(clip.gt.flow[0].data[0]));

  // Frames are stored as 8-bit PNG.
  const auto back = read_clip(dir);
  ASSERT_EQ(back.left.size(), clip.left.size());
  for (std::size_t f = 0; f < clip.left.size(); ++f)
    for (std::size_t i = 0; i < clip.left[f].pixels.size(); ++i) {
      ASSERT_NEAR(back.left[f].pixels[i], clip.left[f].pixels[i], 0.5 / 255 + 1e-12);
      ASSERT_NEAR(back.right[f].pixels[i], clip.right[f].pixels[i], 0.5 / 255 + 1e-12);
    }
  EXPECT_EQ(back.gt.labels, clip.gt.labels);
  EXPECT_EQ(back.spec.to_text(), clip.spec.to_text());
  std::filesystem::remove_all(dir);
}

TEST(ClipIo, TruncatedFlowRejected) {
  SceneSpec s;
  s.frames = 2;
  s.markers = 0;
  const auto dir = fresh_dir("trunc");
  write_clip(generate_clip(s), dir);
  std::filesystem::resize_file(dir / "flow_0000.bin", 100);
  EXPECT_THROW(read_clip(dir), FormatError);
  std::filesystem::remove_all(dir);
}
