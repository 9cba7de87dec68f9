// Copyright (c) 2026, The sendd-desk authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "sendd/autodiff/parameters.hpp"
#include "sendd/geometry/camera.hpp"
#include "sendd/losses/losses.hpp"
#include "sendd/model/model.hpp"
#include "sendd/synth/scene.hpp"

namespace sendd::train {

struct TrainConfig {
  long steps = 2000;
  int batch_size = 2;
  double maxlr = 1e-4;
  double minlr = 4e-6;
  int skip_min = 1, skip_max = 45;
  std::uint64_t seed = 1;
  long checkpoint_every = 250;
  double adam_beta1 = 0.9, adam_beta2 = 0.999, adam_eps = 1e-8;
  model::ModelConfig model;
  losses::LossWeights weights;

  /// Throws ParameterError on inconsistent values.
  void validate() const;
  std::string to_text() const;
  /// key=value lines over the defaults; model keys are prefixed "model.".
  static TrainConfig from_text(const std::string& text);
};

/// A training pair: clip index, first frame, frame skip.
struct PairRef {
  std::size_t clip = 0;
  int frame = 0;
  int skip = 1;
};

/// Pair drawn for batch slot `slot` at `step`; depends only on (seed, step, slot).
/// The skip range is clamped to the clip length.
PairRef sample_pair(const TrainConfig& config, const std::vector<synth::Clip>& clips, long step,
                    int slot);

/// Fixed pairs for validation, drawn with their own stream.
std::vector<PairRef> validation_pairs(const TrainConfig& config,
                                      const std::vector<synth::Clip>& clips, std::size_t count,
                                      std::uint64_t seed);

/// Mean loss terms over pairs (no gradients). Pairs without enough matches
/// are skipped; `used` receives how many contributed.
losses::LossLogRow mean_losses(const ad::ParameterStore& params, const TrainConfig& config,
                               const std::vector<synth::Clip>& clips,
                               const std::vector<PairRef>& pairs, std::size_t* used = nullptr);

struct TrainIo {
  /// Checkpoints, final weights and loss log go here; empty writes nothing.
  std::filesystem::path out_dir;
  /// Checkpoint to resume from (weights, Adam moments, step).
  std::optional<std::filesystem::path> resume;
  /// Start from these weights instead of a fresh initialisation.
  const ad::ParameterStore* initial = nullptr;
  std::ostream* progress = nullptr;
  long progress_every = 50;
};

struct TrainResult {
  ad::ParameterStore params;  // weights and __config only
  std::vector<losses::LossLogRow> log;
  long steps_done = 0;
  long skipped_samples = 0;
  bool diverged = false;
  std::string message;
};

inline constexpr const char* kCheckpointName = "checkpoint.snddw";
inline constexpr const char* kWeightsName = "weights.snddw";
inline constexpr const char* kLossLogName = "loss.csv";

/// Adam over the one-cycle schedule. A non-finite loss or gradient stops the
/// run and returns the last checkpointed weights with diverged set.
TrainResult train(const TrainConfig& config, const std::vector<synth::Clip>& clips,
                  const TrainIo& io = {});

/// Desk corpus: `count` clips of `frames` frames mixing planes and sheets
/// under rigid and deforming motion, rendered without ground truth.
std::vector<synth::Clip> make_corpus(std::size_t count, int frames, std::uint64_t seed,
                                     const geometry::CameraRig& rig = {});

}  // namespace sendd::train
