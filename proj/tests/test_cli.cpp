// Copyright (c) 2026, The sendd-desk authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace fs = std::filesystem;

namespace {

const fs::path& work() {
  static const fs::path d = [] {
    auto p = fs::temp_directory_path() / "sendd_cli";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return d;
}

int run(const std::string& args) {
  const std::string cmd = std::string(SENDD_CLI_PATH) + " " + args + " > " +
                          (work() / "last.log").string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  std::string l;
  while (std::getline(in, l)) out.push_back(l);
  return out;
}

std::string s(const fs::path& p) { return p.string(); }

// Shared fixtures: a static 4-frame clip, a marker clip and fresh weights.
void ensure_fixtures() {
  static bool done = false;
  if (done) return;
  ASSERT_EQ(run("synth --out " + s(work() / "static") + " --frames 4 --markers 0 --seed 3"), 0);
  ASSERT_EQ(run("synth --out " + s(work() / "moving") + " --frames 3 --markers 2 --seed 4 "
                "--motion rigid:0.3,0.1,0"),
            0);
  ASSERT_EQ(run("init --out " + s(work() / "w.snddw")), 0);
  done = true;
}

}  // namespace

TEST(Cli, NoCommandIsInputError) { EXPECT_EQ(run(""), 2); }

TEST(Cli, SynthLayout) {
  ensure_fixtures();
  for (const char* f : {"spec.txt", "left_0003.png", "right_0000.png", "depth_0002.pgm",
                        "markers_0000.png", "flow_0002.bin", "resolved_config.txt"})
    EXPECT_TRUE(fs::exists(work() / "static" / f)) << f;
}

TEST(Cli, SynthBadMotion) {
  EXPECT_EQ(run("synth --out " + s(work() / "bad") + " --motion wobble"), 2);
}

TEST(Cli, SynthTooCloseSurface) {
  EXPECT_EQ(run("synth --out " + s(work() / "close") + " --depth 0.5"), 2);
}

TEST(Cli, TrackGridCounts) {
  ensure_fixtures();
  const auto out = work() / "track_static";
  ASSERT_EQ(run("track --weights " + s(work() / "w.snddw") + " --clip " + s(work() / "static") +
                " --grid 32 --out " + s(out)),
            0);
  const auto rows = lines(out / "tracks.csv");
  ASSERT_FALSE(rows.empty());
  EXPECT_EQ(rows[0], "query_id,frame,u,v,x_mm,y_mm,z_mm,valid");
  const std::size_t queries = lines(out / "queries.csv").size() - 1;
  EXPECT_EQ(queries, (256u / 32) * (192u / 32));
  EXPECT_EQ(rows.size() - 1, queries * 4);
}

TEST(Cli, TrackStride) {
  ensure_fixtures();
  const auto out = work() / "track_stride";
  ASSERT_EQ(run("track --weights " + s(work() / "w.snddw") + " --clip " + s(work() / "static") +
                " --grid 64 --stride 2 --overlays --out " + s(out)),
            0);
  std::set<std::string> frames;
  const auto rows = lines(out / "tracks.csv");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    std::istringstream in(rows[i]);
    std::string id, f;
    std::getline(in, id, ',');
    std::getline(in, f, ',');
    frames.insert(f);
  }
  // floor((4-1)/2) = 1 pair
  EXPECT_EQ(frames, (std::set<std::string>{"0", "2"}));
  EXPECT_TRUE(fs::exists(out / "overlay_0000.png"));
}

TEST(Cli, TrackCorruptWeights) {
  ensure_fixtures();
  const auto bad = work() / "bad.snddw";
  fs::copy_file(work() / "w.snddw", bad, fs::copy_options::overwrite_existing);
  {
    std::fstream f(bad, std::ios::in | std::ios::out | std::ios::binary);
    f.write("XXXX", 4);
  }
  EXPECT_EQ(run("track --weights " + s(bad) + " --clip " + s(work() / "static") + " --out " +
                s(work() / "t_bad")),
            4);
}

TEST(Cli, TrackIncompatibleConfig) {
  ensure_fixtures();
  EXPECT_EQ(run("track --weights " + s(work() / "w.snddw") + " --clip " + s(work() / "static") +
                " --channels 32 --out " + s(work() / "t_c")),
            4);
  EXPECT_EQ(run("track --weights " + s(work() / "w.snddw") + " --clip " + s(work() / "static") +
                " --k 6 --out " + s(work() / "t_k")),
            4);
}

TEST(Cli, TrainMissingData) {
  EXPECT_EQ(run("train --data " + s(work() / "nope") + " --out " + s(work() / "tr")), 2);
}

TEST(Cli, TrainShortRun) {
  ensure_fixtures();
  const auto out = work() / "train";
  ASSERT_EQ(run("train --data " + s(work() / "moving") + " --out " + s(out) +
                " --steps 2 --batch 1 --skip-max 2"),
            0);
  EXPECT_TRUE(fs::exists(out / "weights.snddw"));
  EXPECT_EQ(lines(out / "loss.csv").size(), 3u);
  EXPECT_TRUE(fs::exists(out / "resolved_config.txt"));
}

TEST(Cli, EvalOnMarkers) {
  ensure_fixtures();
  const auto tr = work() / "track_moving";
  ASSERT_EQ(run("track --weights " + s(work() / "w.snddw") + " --clip " + s(work() / "moving") +
                " --out " + s(tr)),
            0);
  const auto out = work() / "eval";
  ASSERT_EQ(run("eval --tracks " + s(tr) + " --clip " + s(work() / "moving") + " --out " + s(out)),
            0);
  for (const char* f : {"eval_clips.csv", "eval_markers.csv", "eval_curve.csv"})
    EXPECT_TRUE(fs::exists(out / f)) << f;
}

TEST(Cli, EvalWithoutMarkers) {
  ensure_fixtures();
  EXPECT_EQ(run("eval --tracks " + s(work() / "track_static") + " --clip " + s(work() / "static") +
                " --out " + s(work() / "eval_none")),
            2);
}

TEST(Cli, Bench) {
  ensure_fixtures();
  const auto out = work() / "bench";
  ASSERT_EQ(run("bench --weights " + s(work() / "w.snddw") + " --counts 16,32 --reps 1 --out " +
                s(out)),
            0);
  const auto rows = lines(out / "bench.csv");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].rfind("queries,detect_ms", 0), 0u);
  const auto params = lines(out / "parameters.csv");
  EXPECT_EQ(params.back().rfind("total,", 0), 0u);
}
