// Copyright 2026 The evnerf Authors
// SPDX-License-Identifier: Apache-2.0
//
// evnerf: simulate event streams from analytic scenes, train a radiance field
// from events, render and evaluate it.
//
// Exit codes: 0 success, 1 runtime failure (or failed gradcheck), 2 usage
// error, 3 malformed input data. Failures print one line to stderr:
//   error: <kind>: <message>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "evnerf/checkpoint.h"
#include "evnerf/config.h"
#include "evnerf/errors.h"
#include "evnerf/gradcheck.h"
#include "evnerf/io.h"
#include "evnerf/pipeline.h"

namespace fs = std::filesystem;
using namespace evnerf;

namespace {

struct Common {
  std::string config;
  std::uint64_t seed = 0;
  int workers = 0;
  CLI::Option* seed_opt = nullptr;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "INI run configuration")->check(CLI::ExistingFile);
  c.seed_opt = sub->add_option("--seed", c.seed, "seed for every random draw");
  sub->add_option("--workers", c.workers, "worker threads (overrides [train] workers)");
}

RunConfig base_config(const Common& c) {
  RunConfig cfg = c.config.empty() ? RunConfig{} : load_config(c.config);
  if (c.seed_opt && c.seed_opt->count()) cfg.train.seed = c.seed;
  if (c.workers > 0) cfg.train.workers = c.workers;
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path);
  f << text;
  if (!f) throw std::runtime_error("cannot write " + path.string());
}

std::string frame_name(const char* prefix, std::size_t i) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%04zu", prefix, i);
  return buf;
}

int cmd_simulate(const RunConfig& cfg, const fs::path& out) {
  fs::create_directories(out / "gt");
  const Simulation sim = simulate(cfg);
  write_events(out / "events.txt", sim.stream);
  write_poses(out / "poses.txt", sim.keyframes);
  write_text(out / "run.ini", format_config(cfg));
  for (std::size_t j = 0; j < sim.keyframes.size(); ++j) {
    const GtFrame g = gt_render(sim.scene, sim.intr, sim.keyframes[j].pose, cfg.eval.gt_steps);
    const fs::path base = out / "gt" / frame_name("frame", j);
    write_pgm16(fs::path(base).replace_extension(".pgm"), g.intensity);
    write_evf(fs::path(base).replace_extension(".evf"),
              {g.intensity, g.depth, g.depth_norm, g.opacity});
  }
  std::cout << "simulated " << sim.stream.events.size() << " events over "
            << sim.keyframes.size() - 1 << " intervals into " << out.string() << '\n';
  return 0;
}

int cmd_train(const RunConfig& cfg, const fs::path& events, const fs::path& poses,
              const fs::path& out, const std::string& resume) {
  const AnalyticScene scene = builtin_scene(cfg.scene.name);
  const CameraIntrinsics intr =
      CameraIntrinsics::centered(cfg.camera.width, cfg.camera.height, cfg.camera.focal);
  const EventStream stream = read_events(events, SensorSize{intr.width, intr.height});
  const std::vector<StampedPose> keyframes = read_poses(poses);
  const TrainingSet set = build_training_set(stream, keyframes, intr, cfg.train);
  Model model;
  TrainState state;
  if (resume.empty()) {
    model = init_model(set, cfg.field, render_settings(scene, cfg), cfg.train);
    state = make_train_state(model);
  } else {
    Checkpoint ck = load_checkpoint(resume);
    if (!ck.state) throw DataError(resume + ": checkpoint has no optimizer state to resume from");
    model = std::move(ck.model);
    state = std::move(*ck.state);
  }
  FitOptions opts;
  opts.out_dir = out;
  opts.checkpoint_every = cfg.checkpoint_every;
  opts.log_every = cfg.log_every;
  opts.on_log = [&](std::uint64_t it, const StepResult& r) {
    std::cout << "iter " << it << " event " << r.loss.event_loss << " thres "
              << r.loss.thres_loss << " B+ " << model.thresholds.mean_plus() << " B- "
              << model.thresholds.mean_minus() << '\n';
  };
  fs::create_directories(out);
  write_text(out / "run.ini", format_config(cfg));
  fit(set, model, state, cfg.train, opts);
  std::cout << "wrote " << (out / "checkpoint.evnf").string() << '\n';
  return 0;
}

int cmd_render(const RunConfig& cfg, const std::string& checkpoint,
               const std::vector<std::string>& pose_args, const std::string& pose_file,
               const std::string& prefix) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  const CameraIntrinsics intr =
      CameraIntrinsics::centered(cfg.camera.width, cfg.camera.height, cfg.camera.focal);
  std::vector<StampedPose> poses;
  for (const std::string& p : pose_args) poses.push_back(parse_pose(p));
  if (!pose_file.empty()) {
    const auto more = read_poses(pose_file);
    poses.insert(poses.end(), more.begin(), more.end());
  }
  if (poses.empty()) throw ArgumentError("render needs --pose or --poses");
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const RenderedImage img = render_image(ck.model, intr, poses[i].pose);
    const std::string base = poses.size() == 1 ? prefix : frame_name(prefix.c_str(), i);
    write_pgm16(base + ".pgm", img.intensity);
    write_evf(base + "_depth.evf", {img.depth_norm, img.opacity});
    std::cout << "wrote " << base << ".pgm and " << base << "_depth.evf\n";
  }
  return 0;
}

int cmd_eval(const RunConfig& cfg, const std::string& checkpoint, const fs::path& out) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  const AnalyticScene scene = builtin_scene(cfg.scene.name);
  const CameraIntrinsics intr =
      CameraIntrinsics::centered(cfg.camera.width, cfg.camera.height, cfg.camera.focal);
  const ViewSet views = evaluation_views(default_orbit(cfg.scene.name), cfg.sim.intervals, cfg.eval);
  const Evaluation e = evaluate(ck.model, scene, intr, views, cfg.eval.gt_steps);
  std::string csv = report_csv_header() + '\n' + report_csv_row("train", e.train) + '\n';
  std::string text = report_summary("train", e.train) + '\n';
  if (!e.novel_views.empty()) {
    csv += report_csv_row("novel", e.novel) + '\n';
    text += report_summary("novel", e.novel) + '\n';
  }
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_text(fs::path(out).replace_extension(".csv"), csv);
  write_text(fs::path(out).replace_extension(".txt"), text);
  std::cout << text;
  return 0;
}

int cmd_sweep(const RunConfig& cfg, const std::vector<double>& ratios, const fs::path& out) {
  fs::create_directories(out);
  RunConfig clean_cfg = cfg;
  clean_cfg.sim.noise_ratio = 0.0;
  const Simulation clean = simulate(clean_cfg);
  FitOptions opts;
  opts.out_dir = out;
  opts.log_every = cfg.log_every;
  const std::vector<SweepRow> rows = noise_sweep(cfg, clean, ratios, opts);
  const std::string csv = sweep_csv(rows);
  write_text(out / "sweep.csv", csv);
  std::cout << csv;
  return 0;
}

int cmd_gradcheck(std::uint64_t seed, int probes) {
  GradcheckOptions opts;
  opts.seed = seed;
  opts.probes_per_block = probes;
  double worst = 0.0;
  bool ok = true;
  for (const GradcheckResult& r : run_gradcheck(opts)) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.suite << ": " << r.checked
              << " gradients";
    if (r.skipped > 0) std::cout << " (" << r.skipped << " skipped at kinks)";
    std::cout << ", max relative error " << r.max_rel_error << " (" << r.worst << ")\n";
    worst = std::max(worst, r.max_rel_error);
    ok = ok && r.passed;
  }
  std::cout << "max relative error " << worst << (ok ? " < " : " >= ") << opts.tolerance << '\n';
  return ok ? 0 : 1;
}

int fail(const char* kind, const std::string& what, int code) {
  std::string msg = what;
  for (char& c : msg) {
    if (c == '\n') c = ' ';
  }
  std::cerr << "error: " << kind << ": " << msg << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Event-camera neural radiance fields"};
  app.require_subcommand(1);

  Common sim_c, train_c, render_c, eval_c, sweep_c;
  std::uint64_t gc_seed = 7;
  int gc_probes = 8;

  auto* sim = app.add_subcommand("simulate", "render an orbit and simulate its event stream");
  add_common(sim, sim_c);
  std::string scene;
  int n_poses = 0, width = 0, height = 0, gt_steps = 0;
  double fps = 0, threshold = 0, threshold_minus = 0, jitter = -1, noise = -1, focal = 0;
  std::string sim_out = ".";
  sim->add_option("--scene", scene, "slab, sphere_plane or hdr_boxes");
  sim->add_option("--poses", n_poses, "keyframe intervals on the orbit");
  sim->add_option("--fps", fps, "rendered frames per second");
  sim->add_option("--threshold", threshold, "contrast threshold B+ (B- = -B+ by default)");
  sim->add_option("--threshold-minus", threshold_minus, "negative threshold B- (< 0)");
  sim->add_option("--jitter", jitter, "per-pixel threshold std");
  sim->add_option("--noise", noise, "spurious events per signal event");
  sim->add_option("--width", width);
  sim->add_option("--height", height);
  sim->add_option("--focal", focal, "focal length in pixels");
  sim->add_option("--gt-steps", gt_steps, "ray-march steps for ground truth");
  sim->add_option("-o,--out", sim_out, "output directory");

  auto* train = app.add_subcommand("train", "fit a field to events and poses");
  add_common(train, train_c);
  std::string events, poses, train_out = "run", resume;
  int iterations = -1;
  train->add_option("--events", events, "events.txt")->required()->check(CLI::ExistingFile);
  train->add_option("--poses", poses, "poses.txt (interval boundaries)")
      ->required()
      ->check(CLI::ExistingFile);
  train->add_option("--iterations", iterations);
  train->add_option("--resume", resume, "checkpoint with optimizer state")->check(CLI::ExistingFile);
  train->add_option("-o,--out", train_out, "output directory");

  auto* render = app.add_subcommand("render", "render intensity and depth from a checkpoint");
  add_common(render, render_c);
  std::string checkpoint, pose_file, prefix = "render";
  std::vector<std::string> pose_args;
  int r_width = 0, r_height = 0;
  double r_focal = 0;
  render->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  render->add_option("--pose", pose_args, "\"t tx ty tz qx qy qz qw\"");
  render->add_option("--poses", pose_file, "pose file")->check(CLI::ExistingFile);
  render->add_option("--width", r_width);
  render->add_option("--height", r_height);
  render->add_option("--focal", r_focal);
  render->add_option("-o,--out", prefix, "output path prefix");

  auto* eval = app.add_subcommand("eval", "compare a checkpoint with the ground-truth renderer");
  add_common(eval, eval_c);
  std::string eval_ckpt, eval_out = "report";
  eval->add_option("--checkpoint", eval_ckpt)->required()->check(CLI::ExistingFile);
  eval->add_option("-o,--out", eval_out, "report path (.csv and .txt are written)");

  auto* sweep = app.add_subcommand("sweep-noise", "train at several noise ratios");
  add_common(sweep, sweep_c);
  std::vector<double> ratios{0.0, 0.3, 0.7, 0.9};
  std::string sweep_out = "sweep";
  sweep->add_option("--ratios", ratios, "comma-separated noise ratios")->delimiter(',');
  sweep->add_option("-o,--out", sweep_out, "output directory");

  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient suites");
  gc->add_option("--seed", gc_seed);
  gc->add_option("--probes", gc_probes, "probes per block on the default architecture");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), 2);
  }

  try {
    if (sim->parsed()) {
      RunConfig cfg = base_config(sim_c);
      if (!scene.empty()) cfg.scene.name = scene;
      if (n_poses > 0) cfg.sim.intervals = n_poses;
      if (fps > 0) cfg.sim.fps = fps;
      if (threshold > 0) {
        cfg.sim.b_plus = threshold;
        cfg.sim.b_minus = -threshold;
      }
      if (threshold_minus < 0) cfg.sim.b_minus = threshold_minus;
      if (jitter >= 0) cfg.sim.jitter_sigma = jitter;
      if (noise >= 0) cfg.sim.noise_ratio = noise;
      if (width > 0) cfg.camera.width = width;
      if (height > 0) cfg.camera.height = height;
      if (focal > 0) cfg.camera.focal = focal;
      if (gt_steps > 0) cfg.sim.gt_steps = gt_steps;
      return cmd_simulate(cfg, sim_out);
    }
    if (train->parsed()) {
      RunConfig cfg = base_config(train_c);
      if (iterations >= 0) cfg.train.iterations = iterations;
      return cmd_train(cfg, events, poses, train_out, resume);
    }
    if (render->parsed()) {
      RunConfig cfg = base_config(render_c);
      if (r_width > 0) cfg.camera.width = r_width;
      if (r_height > 0) cfg.camera.height = r_height;
      if (r_focal > 0) cfg.camera.focal = r_focal;
      return cmd_render(cfg, checkpoint, pose_args, pose_file, prefix);
    }
    if (eval->parsed()) return cmd_eval(base_config(eval_c), eval_ckpt, eval_out);
    if (sweep->parsed()) return cmd_sweep(base_config(sweep_c), ratios, sweep_out);
    if (gc->parsed()) return cmd_gradcheck(gc_seed, gc_probes);
  } catch (const DataError& e) {
    return fail("data", e.what(), 3);
  } catch (const ConfigError& e) {
    return fail("config", e.what(), 1);
  } catch (const ArgumentError& e) {
    return fail("argument", e.what(), 2);
  } catch (const std::exception& e) {
    return fail("runtime", e.what(), 1);
  }
  return 2;
}
