// Copyright (c) 2026, The sendd-desk authors
// SPDX-License-Identifier: Apache-2.0

#include "sendd/autodiff/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "sendd/errors.hpp"

namespace sendd::ad {
namespace {

std::vector<std::size_t> pick_entries(const Tensor& analytic, std::size_t per_param,
                                      std::mt19937_64& rng) {
  const std::size_t n = analytic.size();
  std::vector<std::size_t> idx;
  if (per_param == 0 || per_param >= n) {
    idx.resize(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    return idx;
  }
  std::size_t largest = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (std::abs(analytic[i]) > std::abs(analytic[largest])) largest = i;
  idx.push_back(largest);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  while (idx.size() < per_param) {
    const auto i = pick(rng);
    if (std::find(idx.begin(), idx.end(), i) == idx.end()) idx.push_back(i);
  }
  return idx;
}

GradCheckResult check_entries(const std::function<double(const ParameterStore&)>& f,
                              const std::vector<Tensor>& analytic, const ParameterStore& params,
                              const GradCheckOptions& o) {
  if (analytic.size() != params.size())
    throw DimensionError("finite_diff_check: one analytic gradient per parameter expected");
  if (o.steps.empty()) throw ParameterError("finite_diff_check: no step sizes");
  std::mt19937_64 rng(o.seed);
  ParameterStore probe = params;
  GradCheckResult result;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (auto i : pick_entries(analytic[p], o.entries_per_parameter, rng)) {
      const double w = params.value(p)[i];
      const double a = analytic[p][i];
      double err = std::numeric_limits<double>::infinity(), numeric = 0.0;
      for (double eps : o.steps) {
        probe.value(p)[i] = w + eps;
        const double up = f(probe);
        probe.value(p)[i] = w - eps;
        const double down = f(probe);
        probe.value(p)[i] = w;
        const double n = (up - down) / (2.0 * eps);
        const double e = std::abs(a - n) / std::max({std::abs(a), std::abs(n), o.floor});
        if (e < err) err = e, numeric = n;
      }
      ++result.entries_checked;
      if (result.worst_parameter.empty() || err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst_parameter = params.name(p);
        result.worst_index = i;
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

std::vector<Tensor> analytic_gradients(const LossBuilder& loss, const ParameterStore& params) {
  Tape tape;
  ParamBinding bound(tape, params, true);
  Var l = loss(tape, bound);
  tape.backward(l);
  return bound.gradients();
}

}  // namespace

GradCheckResult finite_diff_check(const std::function<double(const ParameterStore&)>& f,
                                  const std::vector<Tensor>& analytic,
                                  const ParameterStore& params, double eps,
                                  std::size_t entries_per_parameter, std::uint64_t seed) {
  return check_entries(f, analytic, params, {{eps}, 1e-8, entries_per_parameter, seed});
}

GradCheckResult finite_diff_check(const LossBuilder& loss, const ParameterStore& params,
                                  const GradCheckOptions& options) {
  const auto analytic = analytic_gradients(loss, params);
  auto value = [&loss](const ParameterStore& store) {
    Tape tape;
    ParamBinding bound(tape, store, false);
    return loss(tape, bound).item();
  };
  return check_entries(value, analytic, params, options);
}

GradCheckResult finite_diff_check(const LossBuilder& loss, const ParameterStore& params,
                                  double eps, std::size_t entries_per_parameter,
                                  std::uint64_t seed) {
  return finite_diff_check(loss, params, GradCheckOptions{{eps}, 1e-8, entries_per_parameter, seed});
}

}  // namespace sendd::ad
