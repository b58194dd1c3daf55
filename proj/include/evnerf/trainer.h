// Copyright 2026 The evnerf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "evnerf/adam.h"
#include "evnerf/event_loss.h"
#include "evnerf/event_sim.h"
#include "evnerf/geometry.h"
#include "evnerf/model.h"

namespace evnerf {

struct TrainConfig {
  AdamConfig adam;
  int batch_rays = 1024;
  int iterations = 5000;
  double lambda = 1000.0;
  double noise_injection_ratio = 0.05;
  bool joint_thresholds = true;
  double threshold_init = 0.5;   // |B| at start when joint
  double fixed_threshold = 0.3;  // |B| when thresholds are not trained
  double clip_norm = 10.0;
  double density_noise = 1.0;  // std of the raw-density noise while training
  /// lr multiplier reached at the last iteration (exponential decay); 1 = off.
  double lr_final_factor = 1.0;
  int workers = 1;
  std::uint64_t seed = 0;

  void validate() const;
  double learning_rate_at(int iteration) const;
};

/// Event counts for consecutive intervals and the poses bounding them.
struct TrainingSet {
  std::vector<StampedPose> poses;     // T_0 .. T_J
  std::vector<EventCountGrid> grids;  // J grids
  CameraIntrinsics intr;

  int intervals() const { return static_cast<int>(grids.size()); }
  void validate() const;
};

/// Slices `stream` at the pose timestamps, injects noise into every slice at
/// `cfg.noise_injection_ratio` (seeded per slice) and counts events.
TrainingSet build_training_set(const EventStream& stream, const std::vector<StampedPose>& poses,
                               const CameraIntrinsics& intr, const TrainConfig& cfg);

struct RayTuple {
  int interval = 0;
  int u = 0;
  int v = 0;
  int n_pos = 0;
  int n_neg = 0;
};

/// Uniform interval, uniform pixel. Zero-count pixels are kept.
std::vector<RayTuple> sample_batch(const TrainingSet& set, int batch_rays, Rng& rng);

/// Optimizer state carried between steps (and through checkpoints).
struct TrainState {
  Adam<float> field_opt;
  Adam<double> threshold_opt;
  std::uint64_t iteration = 0;

  bool operator==(const TrainState&) const = default;
};

TrainState make_train_state(const Model& model);

struct StepResult {
  LossBreakdown loss;
  double grad_norm = 0.0;
  bool applied = false;  // false when the loss or gradient was non-finite
};

/// One optimization step: sample rays, render each at both interval poses,
/// backpropagate the total loss, clip, and apply Adam. The batch and all
/// per-ray randomness derive from (cfg.seed, state.iteration).
StepResult train_step(const TrainingSet& set, Model& model, TrainState& state,
                      const TrainConfig& cfg);

struct FitOptions {
  std::filesystem::path out_dir;  // empty: nothing written
  int checkpoint_every = 0;       // 0: only the final checkpoint
  int log_every = 50;
  /// Called after each logged iteration.
  std::function<void(std::uint64_t, const StepResult&)> on_log;
};

/// Runs until state.iteration == cfg.iterations. Writes `metrics.csv`,
/// `thresholds.csv`, `checkpoint.evnf` (and periodic `checkpoint_<iter>.evnf`)
/// under out_dir. A resumed state appends to existing logs.
StepResult fit(const TrainingSet& set, Model& model, TrainState& state, const TrainConfig& cfg,
               const FitOptions& opts = {});

/// Fresh model for `set`: thresholds at +-threshold_init when joint training,
/// else at +-fixed_threshold.
Model init_model(const TrainingSet& set, const FieldConfig& field, const RenderSettings& render,
                 const TrainConfig& cfg);

}  // namespace evnerf
