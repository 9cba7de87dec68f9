// Copyright (c) 2026, The sendd-desk authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sendd/autodiff/parameters.hpp"

namespace sendd::ad {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t entries_checked = 0;
};

/// Builds the scalar loss on the given tape with parameters bound through `params`.
using LossBuilder = std::function<Var(Tape& tape, ParamBinding& params)>;

/// Compares reverse-mode gradients against central differences
/// (f(w+eps) - f(w-eps)) / 2eps. Error per entry is
/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
/// `entries_per_parameter` == 0 checks every entry; otherwise that many
/// entries per tensor are drawn (always including the largest analytic one).
GradCheckResult finite_diff_check(const LossBuilder& loss, const ParameterStore& params,
                                  double eps, std::size_t entries_per_parameter = 0,
                                  std::uint64_t seed = 1);

/// Several step sizes per entry: the numeric derivative closest to the
/// analytic one counts, so a step that straddles a kink (relu, bilinear cell
/// edge) does not fail an otherwise sound gradient. Entries whose analytic and
/// numeric values are both below `floor` are compared in absolute terms.
struct GradCheckOptions {
  std::vector<double> steps{1e-6};
  double floor = 1e-8;
  std::size_t entries_per_parameter = 0;
  std::uint64_t seed = 1;
};

GradCheckResult finite_diff_check(const LossBuilder& loss, const ParameterStore& params,
                                  const GradCheckOptions& options);

/// Same check against caller-supplied analytic gradients (one Tensor per parameter).
GradCheckResult finite_diff_check(const std::function<double(const ParameterStore&)>& f,
                                  const std::vector<Tensor>& analytic,
                                  const ParameterStore& params, double eps,
                                  std::size_t entries_per_parameter = 0, std::uint64_t seed = 1);

}  // namespace sendd::ad
