// Copyright (c) 2026, The sendd-desk authors
// SPDX-License-Identifier: Apache-2.0

#include "sendd/train/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <random>
#include <sstream>

#include "sendd/errors.hpp"
#include "sendd/model/model.hpp"

namespace sendd::train {
namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<pipeline::Vec2> random_queries(std::size_t n, const geometry::CameraRig& rig) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> ux(8.0, rig.width - 9.0), uy(8.0, rig.height - 9.0);
  std::vector<pipeline::Vec2> q(n);
  for (auto& p : q) p = {ux(rng), uy(rng)};
  return q;
}

}  // namespace

ParameterCount count_parameters(const ad::ParameterStore& params) {
  ParameterCount c;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& name = params.name(i);
    if (model::is_metadata(name)) continue;
    c.total += params.value(i).size();
    c.by_module[name.substr(0, name.find('.'))] += params.value(i).size();
  }
  return c;
}

void write_parameter_report(std::ostream& out, const ParameterCount& c) {
  out << "module,parameters\n";
  for (const auto& [m, n] : c.by_module) out << m << ',' << n << '\n';
  out << "total," << c.total << '\n';
}

LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
  LinearFit f;
  const std::size_t n = std::min(x.size(), y.size());
  if (n < 2) return f;
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0) return f;
  f.valid = true;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double sse = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = y[i] - (f.intercept + f.slope * x[i]);
    sse += e * e;
  }
  f.r2 = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  return f;
}

BenchReport scaling_benchmark(const pipeline::Model& model, const synth::Clip& clip,
                              std::span<const std::size_t> counts, int reps) {
  if (clip.frames() < 2) throw ContractError("benchmark needs a clip of at least two frames");
  if (reps < 1) throw ParameterError("benchmark repetitions must be >= 1");
  const auto& rig = clip.spec.rig;
  BenchReport r;
  r.repetitions = reps;

  auto run = [&](std::span<const pipeline::Vec2> q, BenchRow* row) {
    auto t = Clock::now();
    const auto fa = pipeline::describe_frame(model, clip.left[0], clip.right[0], 0);
    const auto fb = pipeline::describe_frame(model, clip.left[1], clip.right[1], 1);
    const double detect = ms_since(t);
    t = Clock::now();
    const auto sa = pipeline::stereo_nodes(model, fa, rig.width, rig.height);
    const auto sb = pipeline::stereo_nodes(model, fb, rig.width, rig.height);
    const double stereo = ms_since(t);
    t = Clock::now();
    const auto fl = pipeline::flow_nodes(model, rig, fa, sa, fb, sb);
    const double flow = ms_since(t);
    t = Clock::now();
    auto e = pipeline::interpolate_depth(model, rig, sa, q);
    pipeline::interpolate_motion(model, rig, fl, e);
    const double interp = ms_since(t);
    if (row) {
      row->detect_ms = detect;
      row->stereo_ms = stereo;
      row->flow_ms = flow;
      row->interp_ms = interp;
    }
  };

  for (std::size_t n : counts) {
    const auto q = random_queries(n, rig);
    run(q, nullptr);  // warm-up
    std::vector<double> d, s, f, it;
    for (int k = 0; k < reps; ++k) {
      BenchRow row;
      run(q, &row);
      d.push_back(row.detect_ms);
      s.push_back(row.stereo_ms);
      f.push_back(row.flow_ms);
      it.push_back(row.interp_ms);
    }
    BenchRow row;
    row.queries = n;
    row.detect_ms = median(d);
    row.stereo_ms = median(s);
    row.flow_ms = median(f);
    row.interp_ms = median(it);
    r.rows.push_back(row);
  }

  std::vector<double> x, yi, yt, node;
  for (const auto& row : r.rows) {
    x.push_back(static_cast<double>(row.queries));
    yi.push_back(row.interp_ms);
    yt.push_back(row.total_ms());
    node.push_back(row.node_ms());
  }
  r.interp_fit = fit_line(x, yi);
  r.total_fit = fit_line(x, yt);
  if (!node.empty()) {
    double mean = 0;
    for (double v : node) mean += v;
    mean /= node.size();
    const auto [lo, hi] = std::minmax_element(node.begin(), node.end());
    r.node_variation = mean > 0 ? (*hi - *lo) / mean : 0.0;
  }

  // Streaming: whole clip tracked with and without feature reuse.
  const auto q = random_queries(counts.empty() ? 320 : counts.front(), rig);
  pipeline::TrackOptions opt;
  std::string csv[2];
  double ms[2];
  for (int c = 0; c < 2; ++c) {
    opt.cache = c == 1;
    const auto t = Clock::now();
    const auto tr = pipeline::track_sequence(model, rig, clip.left, clip.right, q, opt);
    ms[c] = ms_since(t);
    std::ostringstream os;
    tr.write_csv(os);
    csv[c] = os.str();
  }
  r.cache_off_ms = ms[0];
  r.cache_on_ms = ms[1];
  r.cache_identical = csv[0] == csv[1];
  r.stream_frames = clip.left.size();
  return r;
}

void BenchReport::write_csv(std::ostream& out) const {
  out << "queries,detect_ms,stereo_ms,flow_ms,interp_ms,total_ms,streaming_off_ms,"
         "streaming_on_ms\n";
  char buf[256];
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof buf, "%zu,%.3f,%.3f,%.3f,%.3f,%.3f,%.3f,%.3f\n", row.queries,
                  row.detect_ms, row.stereo_ms, row.flow_ms, row.interp_ms, row.total_ms(),
                  cache_off_ms, cache_on_ms);
    out << buf;
  }
}

void BenchReport::write_summary(std::ostream& out) const {
  char buf[256];
  out << "repetitions per count: " << repetitions << " (medians)\n";
  if (interp_fit.valid) {
    std::snprintf(buf, sizeof buf,
                  "interpolation: %.4f ms/query + %.3f ms, R^2 = %.4f\n"
                  "total: %.4f ms/query + %.3f ms, R^2 = %.4f\n",
                  interp_fit.slope, interp_fit.intercept, interp_fit.r2, total_fit.slope,
                  total_fit.intercept, total_fit.r2);
    out << buf;
  } else {
    out << "linear fit omitted: needs at least two query counts\n";
  }
  std::snprintf(buf, sizeof buf, "node-stage variation across counts: %.1f%%\n",
                100.0 * node_variation);
  out << buf;
  std::snprintf(buf, sizeof buf,
                "streaming over %zu frames: %.1f ms without reuse, %.1f ms with reuse, outputs %s\n",
                stream_frames, cache_off_ms, cache_on_ms, cache_identical ? "identical" : "DIFFER");
  out << buf;
}

}  // namespace sendd::train
