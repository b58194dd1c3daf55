// Copyright 2026 The evnerf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "evnerf/config.h"
#include "evnerf/event_sim.h"
#include "evnerf/metrics.h"
#include "evnerf/model.h"
#include "evnerf/scene.h"
#include "evnerf/trainer.h"

namespace evnerf {

/// Closed orbit of `intervals` keyframes with timestamps j * interval; the
/// last keyframe repeats the first pose.
std::vector<StampedPose> orbit_keyframes(const OrbitSetup& orbit, int intervals,
                                         double interval);

/// log(I + floor) frames at `subframes` evenly spaced times per keyframe
/// interval (poses interpolated), keyframes included.
std::vector<LogFrame> render_log_frames(const AnalyticScene& scene, const CameraIntrinsics& intr,
                                        const std::vector<StampedPose>& keyframes,
                                        int subframes, int gt_steps);

struct Simulation {
  AnalyticScene scene;
  CameraIntrinsics intr;
  OrbitSetup orbit;
  std::vector<StampedPose> keyframes;
  EventStream stream;
};

/// Renders the orbit of cfg.scene and simulates events (jitter and
/// cfg.sim.noise_ratio applied, seeded from cfg.train.seed).
Simulation simulate(const RunConfig& cfg);

/// Copy of `sim` with `ratio` spurious events injected into the whole stream.
Simulation with_noise(const Simulation& sim, double ratio, std::uint64_t seed);

RenderSettings render_settings(const AnalyticScene& scene, const RunConfig& cfg);

struct ViewSet {
  std::vector<Pose> train;  // evenly spaced keyframes
  std::vector<Pose> novel;  // half-step azimuth offsets, raised elevation
};
ViewSet evaluation_views(const OrbitSetup& orbit, int intervals, const EvalConfig& cfg);

struct Evaluation {
  EvalReport train;
  EvalReport novel;
  std::vector<EvalReport> train_views;
  std::vector<EvalReport> novel_views;
};

Evaluation evaluate(const Model& model, const AnalyticScene& scene, const CameraIntrinsics& intr,
                    const ViewSet& views, int gt_steps);

struct ExperimentResult {
  TrainingSet set;
  Model model;
  TrainState state;
  StepResult last;
  Evaluation eval;
  double train_seconds = 0.0;
};

/// Builds the training set from `sim`, trains with cfg, evaluates.
ExperimentResult run_experiment(const RunConfig& cfg, const Simulation& sim,
                                const FitOptions& opts = {});

struct SweepRow {
  double rho = 0.0;
  EvalReport novel;
};

/// For each ratio: inject noise into the clean simulation, train with the
/// same config and seed, evaluate on held-out views.
std::vector<SweepRow> noise_sweep(const RunConfig& cfg, const Simulation& clean,
                                  std::span<const double> ratios, const FitOptions& opts = {});

/// `rho,ssim,mse,abs_rel` table.
std::string sweep_csv(std::span<const SweepRow> rows);

}  // namespace evnerf
