// Copyright (c) 2026, The sendd-desk authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

namespace sendd::train {

/// Fraction of the run spent ramping up.
inline constexpr double kWarmupFraction = 0.3;

/// Linear minlr -> maxlr over the first 30% of steps, cosine back to minlr at
/// `total`. Steps past the end give minlr. Throws ParameterError unless
/// 0 < minlr < maxlr and total > 0.
double one_cycle_lr(long step, long total, double maxlr, double minlr);

}  // namespace sendd::train
