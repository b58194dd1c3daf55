// Copyright 2026 The evnerf Authors
// SPDX-License-Identifier: Apache-2.0

#include "evnerf/pipeline.h"

#include <chrono>
#include <cmath>
#include <numbers>
#include <sstream>

#include "evnerf/errors.h"
#include "evnerf/event_loss.h"

namespace evnerf {

std::vector<StampedPose> orbit_keyframes(const OrbitSetup& orbit, int intervals,
                                         double interval) {
  if (intervals < 2) throw ArgumentError("orbit needs at least 2 intervals");
  const std::vector<Pose> ring =
      orbit_trajectory(orbit.center, orbit.radius, orbit.elevation_deg, intervals);
  std::vector<StampedPose> out;
  out.reserve(ring.size() + 1);
  for (int j = 0; j <= intervals; ++j) out.push_back({j * interval, ring[j % intervals]});
  return out;
}

std::vector<LogFrame> render_log_frames(const AnalyticScene& scene, const CameraIntrinsics& intr,
                                        const std::vector<StampedPose>& keyframes,
                                        int subframes, int gt_steps) {
  if (keyframes.size() < 2) throw ArgumentError("need at least 2 keyframes");
  if (subframes < 1) throw ArgumentError("subframes must be >= 1");
  std::vector<LogFrame> frames;
  frames.reserve((keyframes.size() - 1) * subframes + 1);
  auto push = [&](double t, const Pose& pose) {
    GtFrame g = gt_render(scene, intr, pose, gt_steps);
    LogFrame f{t, std::move(g.intensity)};
    for (double& x : f.log_intensity.values()) x = std::log(x + kIntensityFloor);
    frames.push_back(std::move(f));
  };
  for (std::size_t j = 0; j + 1 < keyframes.size(); ++j) {
    const StampedPose& a = keyframes[j];
    const StampedPose& b = keyframes[j + 1];
    for (int k = 0; k < subframes; ++k) {
      const double f = static_cast<double>(k) / subframes;
      push(a.t + f * (b.t - a.t), interpolate_pose(a.pose, b.pose, f));
    }
  }
  push(keyframes.back().t, keyframes.back().pose);
  return frames;
}

Simulation simulate(const RunConfig& cfg) {
  cfg.validate();
  Simulation sim;
  sim.scene = builtin_scene(cfg.scene.name);
  sim.intr = CameraIntrinsics::centered(cfg.camera.width, cfg.camera.height, cfg.camera.focal);
  sim.orbit = default_orbit(cfg.scene.name);
  sim.keyframes = orbit_keyframes(sim.orbit, cfg.sim.intervals, cfg.sim.interval);
  const std::vector<LogFrame> frames = render_log_frames(
      sim.scene, sim.intr, sim.keyframes, cfg.sim.subframes(), cfg.sim.gt_steps);
  NoiseConfig jitter;
  jitter.threshold_jitter_sigma = cfg.sim.jitter_sigma;
  jitter.seed = Rng::stream(cfg.train.seed, 0x517).next_u64();
  sim.stream = simulate_events(frames, cfg.sim.b_plus, cfg.sim.b_minus, jitter);
  if (cfg.sim.noise_ratio > 0.0) {
    sim.stream = inject_noise(sim.stream, cfg.sim.noise_ratio,
                              Rng::stream(cfg.train.seed, 0x5e7).next_u64());
  }
  return sim;
}

Simulation with_noise(const Simulation& sim, double ratio, std::uint64_t seed) {
  Simulation out = sim;
  out.stream = inject_noise(sim.stream, ratio, Rng::stream(seed, 0x5e7).next_u64());
  return out;
}

RenderSettings render_settings(const AnalyticScene& scene, const RunConfig& cfg) {
  RenderSettings rs;
  rs.range = scene.range;
  rs.bounds_center = scene.bounds_center;
  rs.bounds_half_extent = scene.bounds_half_extent;
  rs.n_coarse = cfg.n_coarse;
  rs.n_fine = cfg.n_fine;
  rs.validate();
  return rs;
}

ViewSet evaluation_views(const OrbitSetup& orbit, int intervals, const EvalConfig& cfg) {
  ViewSet v;
  for (int i = 0; i < cfg.train_views; ++i) {
    const int j = i * intervals / cfg.train_views;
    v.train.push_back(orbit_pose(orbit.center, orbit.radius, orbit.elevation_deg,
                                 2.0 * std::numbers::pi * j / intervals));
  }
  for (int i = 0; i < cfg.novel_views; ++i) {
    const int j = i * intervals / cfg.novel_views;
    v.novel.push_back(orbit_pose(orbit.center, orbit.radius,
                                 orbit.elevation_deg + cfg.novel_elevation_offset,
                                 2.0 * std::numbers::pi * (j + 0.5) / intervals));
  }
  return v;
}

namespace {

std::vector<EvalReport> evaluate_poses(const Model& model, const AnalyticScene& scene,
                                       const CameraIntrinsics& intr,
                                       const std::vector<Pose>& poses, int gt_steps) {
  std::vector<EvalReport> out;
  for (const Pose& pose : poses) {
    const GtFrame gt = gt_render(scene, intr, pose, gt_steps);
    const RenderedImage pred = render_image(model, intr, pose);
    out.push_back(
        evaluate_view(pred.intensity, pred.depth_norm, gt.intensity, gt.depth_norm, gt.opacity));
  }
  return out;
}

}  // namespace

Evaluation evaluate(const Model& model, const AnalyticScene& scene, const CameraIntrinsics& intr,
                    const ViewSet& views, int gt_steps) {
  Evaluation e;
  e.train_views = evaluate_poses(model, scene, intr, views.train, gt_steps);
  e.novel_views = evaluate_poses(model, scene, intr, views.novel, gt_steps);
  e.train = average(e.train_views);
  if (!e.novel_views.empty()) e.novel = average(e.novel_views);
  return e;
}

ExperimentResult run_experiment(const RunConfig& cfg, const Simulation& sim,
                                const FitOptions& opts) {
  cfg.validate();
  ExperimentResult r;
  r.set = build_training_set(sim.stream, sim.keyframes, sim.intr, cfg.train);
  r.model = init_model(r.set, cfg.field, render_settings(sim.scene, cfg), cfg.train);
  r.state = make_train_state(r.model);
  const auto start = std::chrono::steady_clock::now();
  r.last = fit(r.set, r.model, r.state, cfg.train, opts);
  r.train_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const ViewSet views = evaluation_views(sim.orbit, cfg.sim.intervals, cfg.eval);
  r.eval = evaluate(r.model, sim.scene, sim.intr, views, cfg.eval.gt_steps);
  return r;
}

std::vector<SweepRow> noise_sweep(const RunConfig& cfg, const Simulation& clean,
                                  std::span<const double> ratios, const FitOptions& opts) {
  std::vector<SweepRow> rows;
  for (double rho : ratios) {
    if (!(rho >= 0.0)) throw ArgumentError("noise ratios must be >= 0");
    const Simulation noisy = rho > 0.0 ? with_noise(clean, rho, cfg.train.seed) : clean;
    FitOptions o = opts;
    if (!o.out_dir.empty()) {
      std::ostringstream name;
      name << "rho_" << rho;
      o.out_dir /= name.str();
    }
    const ExperimentResult r = run_experiment(cfg, noisy, o);
    rows.push_back({rho, r.eval.novel_views.empty() ? r.eval.train : r.eval.novel});
  }
  return rows;
}

std::string sweep_csv(std::span<const SweepRow> rows) {
  std::ostringstream os;
  os.precision(9);
  os << "rho,ssim,mse,abs_rel\n";
  for (const SweepRow& r : rows) {
    os << r.rho << ',' << r.novel.ssim << ',' << r.novel.mse << ',' << r.novel.abs_rel << '\n';
  }
  return os.str();
}

}  // namespace evnerf
