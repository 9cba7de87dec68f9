// Copyright (c) 2026, The sendd-desk authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "sendd/autodiff/parameters.hpp"
#include "sendd/pipeline/pipeline.hpp"
#include "sendd/synth/scene.hpp"

namespace sendd::train {

struct ParameterCount {
  std::size_t total = 0;
  std::map<std::string, std::size_t> by_module;
};
/// Element counts of weights, skipping metadata entries.
ParameterCount count_parameters(const ad::ParameterStore& params);
void write_parameter_report(std::ostream& out, const ParameterCount& count);

struct LinearFit {
  bool valid = false;
  double slope = 0.0, intercept = 0.0, r2 = 0.0;
};
/// Least squares y = intercept + slope x; needs two distinct x values.
LinearFit fit_line(std::span<const double> x, std::span<const double> y);

/// Median milliseconds per stage for one query count.
struct BenchRow {
  std::size_t queries = 0;
  double detect_ms = 0, stereo_ms = 0, flow_ms = 0, interp_ms = 0;
  double node_ms() const { return detect_ms + stereo_ms + flow_ms; }
  double total_ms() const { return node_ms() + interp_ms; }
};

struct BenchReport {
  std::vector<BenchRow> rows;
  LinearFit interp_fit, total_fit;
  /// (max - min) / mean of node-stage time over rows.
  double node_variation = 0.0;
  double cache_off_ms = 0.0, cache_on_ms = 0.0;
  std::size_t stream_frames = 0;
  bool cache_identical = false;
  int repetitions = 0;

  /// queries,detect_ms,stereo_ms,flow_ms,interp_ms,total_ms,streaming_off_ms,streaming_on_ms
  void write_csv(std::ostream& out) const;
  void write_summary(std::ostream& out) const;
};

/// Times each stage on frames 0 and 1 of the clip for every query count,
/// `repetitions` times each after a warm-up, then tracks the whole clip with
/// the cache off and on.
BenchReport scaling_benchmark(const pipeline::Model& model, const synth::Clip& clip,
                              std::span<const std::size_t> query_counts, int repetitions = 5);

}  // namespace sendd::train
