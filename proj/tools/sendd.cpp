// Copyright (c) 2026, The sendd-desk authors
// SPDX-License-Identifier: Apache-2.0
//
// sendd: synth | train | track | eval | bench (plus init for fresh weights).
// Exit codes: 0 ok, 2 input error, 3 training failure, 4 weight incompatibility.

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "sendd/errors.hpp"
#include "sendd/geometry/image_io.hpp"
#include "sendd/pipeline/pipeline.hpp"
#include "sendd/synth/scene.hpp"
#include "sendd/train/bench.hpp"
#include "sendd/train/eval.hpp"
#include "sendd/train/trainer.hpp"

namespace fs = std::filesystem;
using namespace sendd;

namespace {

constexpr int kOk = 0, kInput = 2, kTrainFailed = 3, kIncompatible = 4;

struct ExitError {
  int code;
  std::string message;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw ExitError{kInput, "cannot read " + p.string()};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void snapshot(const fs::path& dir, const std::string& command, const std::string& body) {
  fs::create_directories(dir);
  std::ofstream out(dir / "resolved_config.txt");
  out << "command=" << command << "\n" << body;
}

template <class T>
void override_if(CLI::App* app, const char* flag, T& field, const T& value) {
  if (app->count(flag)) field = value;
}

// ---- synth ----

struct SynthArgs {
  fs::path out, config;
  std::uint64_t seed = 1;
  std::string surface = "plane", motion = "none";
  double depth = 60, amplitude = 3, period = 40, radius = 5, fps = 5, texture_period = 40;
  int frames = 10, markers = 6, stride = 1, octaves = 4, width = 256, height = 192;
  double fx = 200, fy = 200, cx = 127.5, cy = 95.5, baseline = 6;
};

void parse_motion(const std::string& text, synth::SceneSpec& s) {
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  std::vector<double> v;
  if (colon != std::string::npos) {
    std::stringstream ss(text.substr(colon + 1));
    std::string cell;
    while (std::getline(ss, cell, ',')) v.push_back(std::stod(cell));
  }
  if (kind == "none") {
    s.motion = synth::Motion::None;
  } else if (kind == "rigid") {
    s.motion = synth::Motion::Rigid;
    if (v.size() != 3) throw ParameterError("--motion rigid:dx,dy,dz needs three values");
    s.velocity_mm = {v[0], v[1], v[2]};
  } else if (kind == "deform") {
    s.motion = synth::Motion::Deform;
    if (!v.empty()) s.deform_amplitude_mm = v[0];
    if (v.size() == 4) s.velocity_mm = {v[1], v[2], v[3]};
    if (v.size() != 0 && v.size() != 1 && v.size() != 4)
      throw ParameterError("--motion deform[:amp[,dx,dy,dz]]");
  } else {
    throw ParameterError("unknown motion " + kind);
  }
}

int run_synth(CLI::App* app, const SynthArgs& a) {
  synth::SceneSpec s;
  if (!a.config.empty()) s = synth::SceneSpec::from_text(slurp(a.config));
  override_if(app, "--seed", s.seed, a.seed);
  override_if(app, "--depth", s.depth_mm, a.depth);
  override_if(app, "--amplitude", s.sine_amplitude_mm, a.amplitude);
  override_if(app, "--period", s.sine_period_mm, a.period);
  override_if(app, "--frames", s.frames, a.frames);
  override_if(app, "--markers", s.markers, a.markers);
  override_if(app, "--marker-radius", s.marker_radius_px, a.radius);
  override_if(app, "--fps", s.fps, a.fps);
  override_if(app, "--stride", s.stride, a.stride);
  override_if(app, "--octaves", s.octaves, a.octaves);
  override_if(app, "--texture-period", s.texture_period_px, a.texture_period);
  override_if(app, "--width", s.rig.width, a.width);
  override_if(app, "--height", s.rig.height, a.height);
  override_if(app, "--fx", s.rig.fx, a.fx);
  override_if(app, "--fy", s.rig.fy, a.fy);
  override_if(app, "--cx", s.rig.cx, a.cx);
  override_if(app, "--cy", s.rig.cy, a.cy);
  override_if(app, "--baseline", s.rig.baseline_mm, a.baseline);
  if (app->count("--surface")) {
    if (a.surface == "plane") s.surface = synth::Surface::Plane;
    else if (a.surface == "sine") s.surface = synth::Surface::Sine;
    else throw ParameterError("unknown surface " + a.surface);
  }
  if (app->count("--motion")) parse_motion(a.motion, s);
  s.validate();
  const auto clip = synth::generate_clip(s);
  const auto report = synth::validate_scene(clip);
  synth::write_clip(clip, a.out);
  snapshot(a.out, "synth", s.to_text());
  std::cerr << "stereo rmse " << report.stereo_rmse << ", temporal rmse " << report.temporal_rmse
            << ", texture sd " << report.texture_std << ": " << report.message << "\n";
  return report.passed ? kOk : kInput;
}

// ---- data ----

std::vector<synth::Clip> load_clips(const fs::path& dir, bool with_gt) {
  if (!fs::is_directory(dir)) throw ExitError{kInput, "data directory not found: " + dir.string()};
  std::vector<synth::Clip> clips;
  if (fs::exists(dir / "spec.txt")) {
    clips.push_back(synth::read_clip(dir, with_gt));
    return clips;
  }
  std::vector<fs::path> subdirs;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory() && fs::exists(e.path() / "spec.txt")) subdirs.push_back(e.path());
  std::sort(subdirs.begin(), subdirs.end());
  for (const auto& p : subdirs) clips.push_back(synth::read_clip(p, with_gt));
  if (clips.empty()) throw ExitError{kInput, "no clips under " + dir.string()};
  return clips;
}

// ---- train ----

struct TrainArgs {
  fs::path data, out = "run", config, resume, init;
  long steps = 2000, checkpoint_every = 250;
  int batch = 2, skip_min = 1, skip_max = 45;
  double maxlr = 1e-4, minlr = 4e-6;
  std::uint64_t seed = 1;
};

int run_train(CLI::App* app, const TrainArgs& a) {
  train::TrainConfig c;
  if (!a.config.empty()) c = train::TrainConfig::from_text(slurp(a.config));
  override_if(app, "--steps", c.steps, a.steps);
  override_if(app, "--batch", c.batch_size, a.batch);
  override_if(app, "--maxlr", c.maxlr, a.maxlr);
  override_if(app, "--minlr", c.minlr, a.minlr);
  override_if(app, "--skip-min", c.skip_min, a.skip_min);
  override_if(app, "--skip-max", c.skip_max, a.skip_max);
  override_if(app, "--seed", c.seed, a.seed);
  override_if(app, "--checkpoint-every", c.checkpoint_every, a.checkpoint_every);
  if (app->count("--seed")) c.model.seed = a.seed;
  c.validate();
  const auto clips = load_clips(a.data, false);
  snapshot(a.out, "train", "data=" + a.data.string() + "\n" + c.to_text());
  train::TrainIo io;
  io.out_dir = a.out;
  io.progress = &std::cerr;
  ad::ParameterStore initial;
  if (!a.resume.empty()) io.resume = a.resume;
  if (!a.init.empty()) {
    try {
      initial = ad::ParameterStore::load(a.init);
      model::check_compatible(c.model, initial);
    } catch (const std::exception& e) {
      throw ExitError{kIncompatible, e.what()};
    }
    io.initial = &initial;
  }
  train::TrainResult r;
  try {
    r = train::train(c, clips, io);
  } catch (const NumericError& e) {
    throw ExitError{kTrainFailed, e.what()};
  }
  if (r.diverged) {
    r.params.save(a.out / "weights_last_good.snddw");
    throw ExitError{kTrainFailed, r.message};
  }
  std::cerr << "trained " << r.steps_done << " steps; skipped samples " << r.skipped_samples
            << "; weights in " << (a.out / train::kWeightsName).string() << "\n";
  return kOk;
}

// ---- track ----

struct TrackArgs {
  fs::path weights, clip, out = "track", queries;
  int stride = 1, grid = 0;
  bool no_cache = false, overlays = false;
  std::size_t channels = 64, k = 4;
};

pipeline::Model load_weights(const fs::path& path, CLI::App* app, std::size_t channels,
                             std::size_t k) {
  try {
    auto m = pipeline::load_model(path);
    model::ModelConfig want = m.config;
    if (app && app->count("--channels")) want.channels = channels;
    if (app && app->count("--k")) want.k = k;
    model::check_compatible(want, ad::ParameterStore::load(path));
    return m;
  } catch (const std::exception& e) {
    throw ExitError{kIncompatible, std::string("weights: ") + e.what()};
  }
}

int run_track(CLI::App* app, const TrackArgs& a) {
  if (a.stride < 1) throw ExitError{kInput, "--stride must be >= 1"};
  const auto model = load_weights(a.weights, app, a.channels, a.k);
  const auto clips = load_clips(a.clip, false);
  const auto& clip = clips.front();
  const auto& rig = clip.spec.rig;
  std::vector<train::Query> queries;
  std::string source;
  if (!a.queries.empty()) {
    queries = train::read_queries_csv(a.queries);
    source = "file:" + a.queries.string();
  } else if (a.grid > 0) {
    for (int y = a.grid / 2; y < rig.height; y += a.grid)
      for (int x = a.grid / 2; x < rig.width; x += a.grid)
        queries.push_back({queries.size(), {double(x), double(y)}, 0, false});
    source = "grid:" + std::to_string(a.grid);
  } else if (fs::exists(a.clip / "markers_0000.png")) {
    const auto g = geometry::read_png_raw(a.clip / "markers_0000.png");
    std::vector<int> labels(g.values.begin(), g.values.end());
    queries = train::marker_queries(labels, g.width, clip.spec.markers);
    source = "markers";
  } else {
    for (int y = 8; y < rig.height; y += 16)
      for (int x = 8; x < rig.width; x += 16)
        queries.push_back({queries.size(), {double(x), double(y)}, 0, false});
    source = "grid:16";
  }
  std::vector<pipeline::Vec2> uv;
  for (const auto& q : queries) uv.push_back(q.uv);
  pipeline::TrackOptions opt;
  opt.stride = a.stride;
  opt.cache = !a.no_cache;
  const auto r = pipeline::track_sequence(model, rig, clip.left, clip.right, uv, opt);

  fs::create_directories(a.out);
  {
    std::ofstream out(a.out / "tracks.csv");
    r.write_csv(out);
  }
  {
    std::ofstream out(a.out / "queries.csv");
    train::write_queries_csv(out, queries);
  }
  if (a.overlays)
    for (std::size_t k = 0; k < r.frames.size(); ++k)
      geometry::write_png(a.out / synth::frame_name("overlay", r.frames[k], ".png"),
                          pipeline::overlay_tracks(clip.left[r.frames[k]], r, k));
  std::ostringstream cfg;
  cfg << "weights=" << a.weights.string() << "\nclip=" << a.clip.string() << "\nqueries=" << source
      << "\nstride=" << a.stride << "\ncache=" << (opt.cache ? 1 : 0) << "\n"
      << model.config.to_text();
  snapshot(a.out, "track", cfg.str());
  for (const auto& d : r.diagnostics) std::cerr << d << "\n";
  std::cerr << queries.size() << " queries over " << r.frames.size() << " frames; "
            << r.detect_invocations << " detection passes, " << r.cache_hits << " reused\n";
  return kOk;
}

// ---- eval ----

struct EvalArgs {
  std::vector<fs::path> tracks, clips;
  fs::path out = "eval";
};

int run_eval(const EvalArgs& a) {
  if (a.tracks.size() != a.clips.size())
    throw ExitError{kInput, "give one --clip per --tracks directory"};
  std::vector<train::ClipEval> evals;
  std::size_t evaluated = 0;
  for (std::size_t i = 0; i < a.tracks.size(); ++i) {
    const auto clip = synth::read_clip(a.clips[i], true);
    const auto queries = train::read_queries_csv(a.tracks[i] / "queries.csv");
    const auto tracks = train::read_track_csv(a.tracks[i] / "tracks.csv");
    auto ce = train::evaluate_clip(a.clips[i].filename().string(), clip, queries, tracks);
    evaluated += ce.markers.size();
    evals.push_back(std::move(ce));
  }
  if (evaluated == 0) throw ExitError{kInput, "no markers overlap between tracks and ground truth"};
  const auto report = train::build_report(std::move(evals));
  fs::create_directories(a.out);
  {
    std::ofstream o(a.out / "eval_clips.csv");
    report.write_clips_csv(o);
  }
  {
    std::ofstream o(a.out / "eval_markers.csv");
    report.write_markers_csv(o);
  }
  {
    std::ofstream o(a.out / "eval_curve.csv");
    report.write_curve_csv(o);
  }
  {
    std::ofstream o(a.out / "summary.txt");
    report.write_summary(o);
  }
  report.write_summary(std::cout);
  std::ostringstream cfg;
  for (std::size_t i = 0; i < a.tracks.size(); ++i)
    cfg << "tracks=" << a.tracks[i].string() << "\nclip=" << a.clips[i].string() << "\n";
  snapshot(a.out, "eval", cfg.str());
  return kOk;
}

// ---- bench ----

struct BenchArgs {
  fs::path weights, clip, out = "bench";
  std::vector<std::size_t> counts{320, 640, 1280, 2560};
  int reps = 5, frames = 3;
};

int run_bench(const BenchArgs& a) {
  const auto model = load_weights(a.weights, nullptr, 0, 0);
  synth::Clip clip;
  if (!a.clip.empty()) {
    clip = load_clips(a.clip, false).front();
  } else {
    synth::SceneSpec s;
    s.seed = 11;
    s.surface = synth::Surface::Sine;
    s.motion = synth::Motion::Rigid;
    s.velocity_mm = {0.5, 0.2, 0.0};
    s.frames = a.frames;
    clip = synth::generate_clip(s, false);
  }
  const auto r = train::scaling_benchmark(model, clip, a.counts, a.reps);
  fs::create_directories(a.out);
  {
    std::ofstream o(a.out / "bench.csv");
    r.write_csv(o);
  }
  {
    std::ofstream o(a.out / "bench_summary.txt");
    r.write_summary(o);
  }
  {
    std::ofstream o(a.out / "parameters.csv");
    train::write_parameter_report(o, train::count_parameters(model.params));
  }
  r.write_summary(std::cout);
  train::write_parameter_report(std::cout, train::count_parameters(model.params));
  std::ostringstream cfg;
  cfg << "weights=" << a.weights.string() << "\nclip=" << (a.clip.empty() ? "synthetic" : a.clip.string())
      << "\ncounts=";
  for (std::size_t i = 0; i < a.counts.size(); ++i) cfg << (i ? "," : "") << a.counts[i];
  cfg << "\nrepetitions=" << a.reps << "\n";
  snapshot(a.out, "bench", cfg.str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse depth and scene flow on stereo sequences"};
  app.require_subcommand(1);
  int threads = 1;
  app.add_option("--threads", threads, "Worker threads (the pipeline runs single-threaded)");

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Generate and validate a synthetic stereo clip");
  synth->add_option("--out", sa.out, "Clip directory")->required();
  synth->add_option("--config", sa.config, "Scene spec file (key=value)");
  synth->add_option("--seed", sa.seed);
  synth->add_option("--surface", sa.surface, "plane | sine");
  synth->add_option("--motion", sa.motion, "none | rigid:dx,dy,dz | deform[:amp[,dx,dy,dz]] (mm/frame)");
  synth->add_option("--depth", sa.depth, "Surface depth, mm");
  synth->add_option("--amplitude", sa.amplitude, "Sheet amplitude, mm");
  synth->add_option("--period", sa.period, "Sheet period, mm");
  synth->add_option("--frames", sa.frames);
  synth->add_option("--markers", sa.markers);
  synth->add_option("--marker-radius", sa.radius, "px");
  synth->add_option("--fps", sa.fps);
  synth->add_option("--stride", sa.stride);
  synth->add_option("--octaves", sa.octaves);
  synth->add_option("--texture-period", sa.texture_period, "px");
  synth->add_option("--width", sa.width);
  synth->add_option("--height", sa.height);
  synth->add_option("--fx", sa.fx);
  synth->add_option("--fy", sa.fy);
  synth->add_option("--cx", sa.cx);
  synth->add_option("--cy", sa.cy);
  synth->add_option("--baseline", sa.baseline, "mm");

  TrainArgs ta;
  auto* trn = app.add_subcommand("train", "Unsupervised training on clip directories");
  trn->add_option("--data", ta.data, "Clip directory or directory of clips")->required();
  trn->add_option("--out", ta.out, "Output directory");
  trn->add_option("--config", ta.config, "Training config file (key=value)");
  trn->add_option("--steps", ta.steps);
  trn->add_option("--batch", ta.batch);
  trn->add_option("--maxlr", ta.maxlr);
  trn->add_option("--minlr", ta.minlr);
  trn->add_option("--skip-min", ta.skip_min);
  trn->add_option("--skip-max", ta.skip_max);
  trn->add_option("--seed", ta.seed);
  trn->add_option("--checkpoint-every", ta.checkpoint_every);
  trn->add_option("--resume", ta.resume, "Checkpoint to continue from");
  trn->add_option("--init", ta.init, "Start from these weights");

  TrackArgs tr;
  auto* trk = app.add_subcommand("track", "Track query points through a clip");
  trk->add_option("--weights", tr.weights)->required();
  trk->add_option("--clip", tr.clip)->required();
  trk->add_option("--out", tr.out);
  trk->add_option("--queries", tr.queries, "queries.csv (query_id,u,v,marker,kind)");
  trk->add_option("--grid", tr.grid, "Grid queries with this spacing, px");
  trk->add_option("--stride", tr.stride);
  trk->add_flag("--no-cache", tr.no_cache, "Recompute features for every pair");
  trk->add_flag("--overlays", tr.overlays, "Write overlay PNGs");
  trk->add_option("--channels", tr.channels, "Expected channel width c");
  trk->add_option("--k", tr.k, "Expected neighbour count k");

  EvalArgs ea;
  auto* evl = app.add_subcommand("eval", "Endpoint error and chamfer distance against ground truth");
  evl->add_option("--tracks", ea.tracks, "Track output directories")->required();
  evl->add_option("--clip", ea.clips, "Matching clip directories")->required();
  evl->add_option("--out", ea.out);

  BenchArgs ba;
  auto* bch = app.add_subcommand("bench", "Stage timings versus query count");
  bch->add_option("--weights", ba.weights)->required();
  bch->add_option("--clip", ba.clip, "Clip to time on (default: synthetic)");
  bch->add_option("--counts", ba.counts)->delimiter(',');
  bch->add_option("--reps", ba.reps);
  bch->add_option("--frames", ba.frames, "Frames of the synthetic streaming clip");
  bch->add_option("--out", ba.out);

  fs::path init_out;
  std::uint64_t init_seed = 1;
  auto* ini = app.add_subcommand("init", "Write freshly initialised weights");
  ini->add_option("--out", init_out)->required();
  ini->add_option("--seed", init_seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kInput;
  }

  try {
    if (*synth) return run_synth(synth, sa);
    if (*trn) return run_train(trn, ta);
    if (*trk) return run_track(trk, tr);
    if (*evl) return run_eval(ea);
    if (*bch) return run_bench(ba);
    if (*ini) {
      model::ModelConfig c;
      c.seed = init_seed;
      model::init_parameters(c).save(init_out);
      return kOk;
    }
  } catch (const ExitError& e) {
    std::cerr << "error: " << e.message << "\n";
    return e.code;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kTrainFailed;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInput;
  }
  return kInput;
}
