// Copyright (c) 2026, The sendd-desk authors
// SPDX-License-Identifier: Apache-2.0

#include "sendd/detect/detector.hpp"

#include <cmath>
#include <iomanip>

#include "sendd/autodiff/ops.hpp"
#include "sendd/autodiff/ops_image.hpp"
#include "sendd/errors.hpp"

namespace sendd::detect {

using ad::Shape;
using ad::Tensor;
using ad::Var;

Var prepare_image(ad::Tape& tape, const geometry::Image& img) {
  Tensor g = img.gray_tensor();
  double mean = 0.0;
  for (double v : g.values()) mean += v;
  mean /= static_cast<double>(g.size());
  double var = 0.0;
  for (double v : g.values()) var += (v - mean) * (v - mean);
  const double sd = std::max(std::sqrt(var / static_cast<double>(g.size())), 1e-3);
  for (auto& v : g.values()) v = (v - mean) / sd;
  return tape.constant(std::move(g));
}

Var detector_logits(ad::ParamBinding& p, const Var& gray) {
  const std::size_t h = gray.shape().at(0), w = gray.shape().at(1);
  Var x = ad::reshape(gray, {1, h, w});
  x = ad::relu(ad::conv2d(x, p("detector.conv1.w"), p("detector.conv1.b")));
  x = ad::relu(ad::conv2d(x, p("detector.conv2.w"), p("detector.conv2.b")));
  // The per-cell softmax ignores a constant offset, so the last layer has no bias.
  x = ad::conv2d(x, p("detector.conv3.w"), p.tape().constant(ad::Tensor({1})));
  return ad::reshape(x, {h, w});
}

KeypointSet detect(ad::ParamBinding& p, const Var& gray, Mode mode,
                   const model::ModelConfig& cfg) {
  if (gray.value().rank() != 2) throw DimensionError("detect: expected an [H,W] image");
  const std::size_t h = gray.shape()[0], w = gray.shape()[1], cell = cfg.cell;
  if (h % cell || w % cell)
    throw DimensionError("detect: image " + std::to_string(w) + "x" + std::to_string(h) +
                         " is not divisible into " + std::to_string(cell) + "-px cells");
  const std::size_t tx = w / cell, ty = h / cell;
  Var logits = detector_logits(p, gray);
  const auto& lv = logits.value();

  KeypointSet kp;
  kp.scores.resize(tx * ty);
  kp.cell_index.resize(tx * ty);
  Tensor hard({tx * ty, 2});
  for (std::size_t cy = 0; cy < ty; ++cy) {
    for (std::size_t cx = 0; cx < tx; ++cx) {
      const std::size_t k = cy * tx + cx;
      double best = -INFINITY;
      std::size_t bx = 0, by = 0;
      for (std::size_t y = cy * cell; y < (cy + 1) * cell; ++y) {
        for (std::size_t x = cx * cell; x < (cx + 1) * cell; ++x) {
          if (lv[y * w + x] > best) {
            best = lv[y * w + x];
            bx = x;
            by = y;
          }
        }
      }
      kp.scores[k] = best;
      kp.cell_index[k] = k;
      hard[2 * k] = static_cast<double>(bx);
      hard[2 * k + 1] = static_cast<double>(by);
    }
  }
  if (mode == Mode::Train)
    kp.positions = ad::cell_soft_argmax(logits, cell, cfg.detect_temperature, cfg.detect_window);
  else
    kp.positions = gray.tape()->constant(std::move(hard));
  return kp;
}

void describe(ad::ParamBinding& p, const Var& gray, KeypointSet& kp,
              const model::ModelConfig& cfg) {
  const std::size_t n = kp.size(), ps = cfg.patch, taps = ps * ps;
  auto& tape = *gray.tape();
  if (n == 0) {
    kp.descriptors = tape.constant(Tensor({0, cfg.channels}));
    return;
  }
  std::vector<std::size_t> rep(n * taps);
  Tensor offsets({n * taps, 2});
  const double half = (static_cast<double>(ps) - 1.0) / 2.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < taps; ++t) {
      rep[i * taps + t] = i;
      offsets[2 * (i * taps + t)] = static_cast<double>(t % ps) - half;
      offsets[2 * (i * taps + t) + 1] = static_cast<double>(t / ps) - half;
    }
  }
  Var coords = ad::add(ad::gather_rows(kp.positions, rep), tape.constant(std::move(offsets)));
  Var patch = ad::reshape(ad::bilinear_sample(gray, coords), {n, taps});

  Tensor rounded = kp.positions.value();
  for (auto& v : rounded.values()) v = std::round(v);
  Var frac = ad::sub(kp.positions, tape.constant(std::move(rounded)));
  Var enc = ad::linear(ad::fourier_features(frac, cfg.bands), p("descriptor.offset.w"),
                       p("descriptor.offset.b"));

  const Var parts[] = {patch, enc};
  Var x = ad::concat_cols(parts);
  x = ad::relu(ad::linear(x, p("descriptor.fc1.w"), p("descriptor.fc1.b")));
  x = ad::linear(x, p("descriptor.fc2.w"), p("descriptor.fc2.b"));
  kp.descriptors = ad::row_l2_normalize(x);
}

void write_keypoints_csv(std::ostream& out, int frame, const KeypointSet& kp, bool header) {
  if (header) out << "frame,cell,u,v,score\n";
  const auto& pos = kp.positions.value();
  out << std::setprecision(9);
  for (std::size_t i = 0; i < kp.size(); ++i)
    out << frame << ',' << kp.cell_index[i] << ',' << pos[2 * i] << ',' << pos[2 * i + 1] << ','
        << kp.scores[i] << '\n';
}

}  // namespace sendd::detect
