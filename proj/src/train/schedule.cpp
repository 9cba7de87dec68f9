// Copyright (c) 2026, The sendd-desk authors
// SPDX-License-Identifier: Apache-2.0

#include "sendd/train/schedule.hpp"

#include <cmath>
#include <numbers>

#include "sendd/errors.hpp"

namespace sendd::train {

double one_cycle_lr(long step, long total, double maxlr, double minlr) {
  if (total <= 0) throw ParameterError("one_cycle_lr: total must be positive");
  if (!(minlr > 0.0) || !(minlr < maxlr)) throw ParameterError("one_cycle_lr: need 0 < minlr < maxlr");
  if (step <= 0) return minlr;
  if (step >= total) return minlr;
  const double peak = kWarmupFraction * static_cast<double>(total);
  const double s = static_cast<double>(step);
  if (s <= peak) return minlr + (maxlr - minlr) * s / peak;
  const double t = (s - peak) / (static_cast<double>(total) - peak);
  return minlr + 0.5 * (maxlr - minlr) * (1.0 + std::cos(std::numbers::pi * t));
}

}  // namespace sendd::train
