// Copyright 2026 The evnerf Authors
// SPDX-License-Identifier: Apache-2.0
//
// End-to-end acceptance runs. Prints one PASS/FAIL line per criterion and
// exits non-zero when any criterion fails. Training runs are expensive; the
// desk configuration below trains each model for 5000 iterations.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "evnerf/checkpoint.h"
#include "evnerf/config.h"
#include "evnerf/errors.h"
#include "evnerf/event_loss.h"
#include "evnerf/gradcheck.h"
#include "evnerf/io.h"
#include "evnerf/pipeline.h"
#include "evnerf/renderer.h"

namespace fs = std::filesystem;
using namespace evnerf;

namespace {

// Tolerances.
constexpr double kGradcheckSeconds = 120.0;
constexpr double kSlabIntensityRel = 1e-3;
constexpr double kSlabDepthAbs = 1e-2;
constexpr double kTrainSsim = 0.85;
constexpr double kNovelSsim = 0.80;
constexpr double kAbsRel = 0.10;
constexpr double kDeskBudgetSeconds = 45 * 60;  // on 8 cores
constexpr double kNoiseDrop = 0.08;
constexpr double kNoise03Ssim = 0.80;
constexpr double kThresholdRatio = 0.45 / 0.35;
constexpr double kRatioTolerance = 0.15;
constexpr double kBoundTolerance = 1e-3;
constexpr double kHdrPearson = 0.95;
constexpr double kHdrDecadePearson = 0.90;

int hardware_workers() { return std::max(1u, std::thread::hardware_concurrency()); }

RunConfig desk_config() {
  RunConfig cfg;
  cfg.scene.name = "sphere_plane";
  cfg.camera = {64, 64, 80.0};
  cfg.sim.intervals = 60;
  cfg.sim.fps = 240;
  cfg.sim.interval = 1.0 / 24;
  cfg.sim.gt_steps = 128;
  cfg.field.depth = 4;
  cfg.field.width = 128;
  cfg.n_coarse = 32;
  cfg.n_fine = 32;
  cfg.train.iterations = 5000;
  cfg.train.batch_rays = 128;
  cfg.train.workers = hardware_workers();
  cfg.train.seed = 0;
  cfg.log_every = 250;
  cfg.eval.train_views = 10;
  cfg.eval.novel_views = 10;
  return cfg;
}

struct Line {
  int id = 0;
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<std::uint8_t> read_bytes(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

class Suite {
 public:
  explicit Suite(fs::path out) : out_(std::move(out)) { fs::create_directories(out_); }

  Line gradients() {
    const auto start = std::chrono::steady_clock::now();
    const auto results = run_gradcheck();
    const double secs = seconds_since(start);
    bool ok = secs < kGradcheckSeconds;
    double worst = 0.0;
    std::size_t checked = 0;
    for (const auto& r : results) {
      ok = ok && r.passed;
      worst = std::max(worst, r.max_rel_error);
      checked += r.checked;
    }
    return {1, ok,
            std::to_string(checked) + " gradients, max rel error " + fmt(worst, 3) + " (tol 1e-5), " +
                fmt(secs, 3) + " s"};
  }

  // Slab viewed straight down through its thickness, 3 units above its top face.
  Line compositing() {
    const AnalyticScene slab = builtin_scene("slab");
    CameraIntrinsics intr = CameraIntrinsics::centered(1, 1, 1.0);
    const double entry = 3.0;
    const Pose pose = Pose::look_at(Vec3(0, 0, 0.5 + entry), Vec3::Zero(), Vec3::UnitY());
    const GtFrame gt = gt_render(slab, intr, pose, 1024);

    // Same quadrature through the volume renderer's sampler and compositor.
    const Ray ray = ray_for_pixel(intr, pose, 0, 0, slab.range);
    Rng rng(0);
    const RaySamples s = sample_stratified(ray, 1024, rng, false);
    std::vector<double> sigma(s.size()), y(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      const auto e = slab.eval(s.x[i]);
      sigma[i] = e.sigma;
      y[i] = e.y;
    }
    const RenderResult r = composite(sigma, y, s);

    const double want = 1.0 - std::exp(-2.0);
    const double mean_depth = entry + 0.5 - std::exp(-2.0) / (1.0 - std::exp(-2.0));
    const double gt_rel = std::abs(gt.intensity(0, 0) - want) / want;
    const double r_rel = std::abs(r.intensity - want) / want;
    const double gt_depth = std::abs(gt.depth_norm(0, 0) - mean_depth);
    const double r_depth = std::abs(r.depth_norm - mean_depth);
    const bool ok = gt_rel <= kSlabIntensityRel && r_rel <= kSlabIntensityRel &&
                    gt_depth <= kSlabDepthAbs && r_depth <= kSlabDepthAbs;
    return {2, ok,
            "I rel error " + fmt(std::max(gt_rel, r_rel), 3) + " (tol 1e-3), depth_norm error " +
                fmt(std::max(gt_depth, r_depth), 3) + " (tol 1e-2), N=1024"};
  }

  Line simulator() {
    const AnalyticScene scene = builtin_scene("sphere_plane");
    const CameraIntrinsics intr = CameraIntrinsics::centered(64, 64, 80.0);
    double worst = 0.0;
    std::size_t events = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      // Each seed perturbs the orbit so the five runs see different motion.
      Rng rng = Rng::stream(seed, 0xacce);
      OrbitSetup orbit = default_orbit("sphere_plane");
      orbit.radius = rng.uniform(3.5, 4.5);
      orbit.elevation_deg = rng.uniform(35.0, 55.0);
      orbit.center = Vec3(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), 0.0);
      const auto keys = orbit_keyframes(orbit, 60, 1.0 / 24);
      const auto frames = render_log_frames(scene, intr, keys, 10, 128);
      const EventStream s = simulate_events(frames, 0.3, -0.3, NoiseConfig{});
      events += s.events.size();
      Image sum(64, 64, 0.0);
      std::size_t next = 0;
      for (const LogFrame& f : frames) {
        while (next < s.events.size() && s.events[next].t <= f.t) {
          const Event& e = s.events[next++];
          sum(e.u, e.v) += e.polarity > 0 ? 0.3 : -0.3;
        }
        for (int v = 0; v < 64; ++v) {
          for (int u = 0; u < 64; ++u) {
            const double truth = f.log_intensity(u, v) - frames[0].log_intensity(u, v);
            worst = std::max(worst, std::abs(sum(u, v) - truth));
          }
        }
      }
    }
    return {3, worst <= 0.3 + 1e-9,
            "max |running sum - log I| " + fmt(worst, 4) + " (tol 0.3) over 5 orbits, " +
                std::to_string(events) + " events"};
  }

  Line reconstruction() {
    const ExperimentResult& r = desk();
    const double budget = kDeskBudgetSeconds * 8.0 / std::min(8, hardware_workers());
    const bool ok = r.eval.train.ssim >= kTrainSsim && r.eval.novel.ssim >= kNovelSsim &&
                    r.eval.novel.abs_rel <= kAbsRel && r.eval.train.abs_rel <= kAbsRel &&
                    desk_seconds_ <= budget;
    return {4, ok,
            "SSIM train " + fmt(r.eval.train.ssim) + " (>= 0.85), novel " + fmt(r.eval.novel.ssim) +
                " (>= 0.80), Abs Rel train " + fmt(r.eval.train.abs_rel) + " novel " +
                fmt(r.eval.novel.abs_rel) + " (<= 0.10), " + fmt(desk_seconds_ / 60, 3) +
                " min on " + std::to_string(hardware_workers()) + " cores (budget " +
                fmt(budget / 60, 3) + " min)"};
  }

  Line noise() {
    const double clean = desk().eval.novel.ssim;
    const RunConfig cfg = desk_config();
    std::map<double, double> ssim;
    for (double rho : {0.3, 0.7}) {
      std::ostringstream name;
      name << "noise_" << rho;
      const Simulation noisy = with_noise(desk_sim(), rho, cfg.train.seed);
      ssim[rho] = train(name.str(), cfg, noisy).eval.novel.ssim;
    }
    const double drop = clean - ssim[0.7];
    const bool ok = drop <= kNoiseDrop && ssim[0.3] >= kNoise03Ssim;
    return {5, ok,
            "novel SSIM rho=0 " + fmt(clean) + ", rho=0.3 " + fmt(ssim[0.3]) + " (>= 0.80), rho=0.7 " +
                fmt(ssim[0.7]) + ", drop " + fmt(drop, 3) + " (<= 0.08)"};
  }

  Line thresholds() {
    RunConfig cfg = desk_config();
    cfg.sim.b_plus = 0.45;
    cfg.sim.b_minus = -0.35;
    const ExperimentResult r = train("thresholds", cfg, simulate(cfg));
    const ThresholdSet& t = r.model.thresholds;
    double ratio = 0.0, worst_plus = 1e9, worst_minus = -1e9;
    for (int j = 0; j < t.intervals(); ++j) {
      ratio += t.plus(j) / -t.minus(j);
      worst_plus = std::min(worst_plus, t.plus(j));
      worst_minus = std::max(worst_minus, t.minus(j));
    }
    ratio /= t.intervals();
    const double rel = std::abs(ratio - kThresholdRatio) / kThresholdRatio;
    const bool bound = worst_plus >= kBoundPlus - kBoundTolerance &&
                       worst_minus <= kBoundMinus + kBoundTolerance;
    return {6, rel <= kRatioTolerance && bound,
            "mean B+/|B-| " + fmt(ratio) + " vs " + fmt(kThresholdRatio) + " (" +
                fmt(100 * rel, 3) + "%, tol 15%), min B+ " + fmt(worst_plus) + ", max B- " +
                fmt(worst_minus) + " (bound +-0.3, tol 1e-3)"};
  }

  Line ablation() {
    std::vector<double> full, off;
    std::ostringstream seeds;
    for (std::uint64_t seed : {0, 1, 2}) {
      RunConfig on = desk_config();
      on.train.seed = seed;
      RunConfig plain = on;
      plain.train.joint_thresholds = false;
      plain.train.noise_injection_ratio = 0.0;
      const double a = seed == 0 ? desk().eval.novel.ssim
                                 : train("ablation_full_" + std::to_string(seed), on, desk_sim())
                                       .eval.novel.ssim;
      const double b =
          train("ablation_off_" + std::to_string(seed), plain, desk_sim()).eval.novel.ssim;
      full.push_back(a);
      off.push_back(b);
      seeds << " seed " << seed << ": " << fmt(a) << " vs " << fmt(b)
            << (a < b ? " (inverted)" : "") << ';';
    }
    const double mf = median(full), mo = median(off);
    return {7, mf >= mo,
            "median novel SSIM full " + fmt(mf) + " vs off " + fmt(mo) + ";" + seeds.str()};
  }

  Line hdr() {
    RunConfig cfg = desk_config();
    cfg.scene.name = "hdr_boxes";
    const Simulation sim = simulate(cfg);
    const ExperimentResult r = train("hdr", cfg, sim);
    const ViewSet views = evaluation_views(sim.orbit, cfg.sim.intervals, cfg.eval);
    std::vector<double> all_p, all_g, dark_p, dark_g, bright_p, bright_g;
    for (const Pose& pose : views.novel) {
      const GtFrame gt = gt_render(sim.scene, sim.intr, pose, cfg.eval.gt_steps);
      const RenderedImage pred = render_image(r.model, sim.intr, pose);
      const Mask mask = threshold_mask(gt.opacity, 0.5);
      const Alignment al = align_log_affine(pred.intensity, gt.intensity, mask);
      const Image aligned = apply_alignment(pred.intensity, al);
      for (std::size_t i = 0; i < mask.size(); ++i) {
        if (!mask[i]) continue;
        const double p = std::log(aligned[i] + kIntensityFloor);
        const double g = std::log(gt.intensity[i] + kIntensityFloor);
        all_p.push_back(p);
        all_g.push_back(g);
        if (gt.intensity[i] < 0.1) {
          dark_p.push_back(p);
          dark_g.push_back(g);
        } else if (gt.intensity[i] >= 10.0) {
          bright_p.push_back(p);
          bright_g.push_back(g);
        }
      }
    }
    auto corr = [](const std::vector<double>& a, const std::vector<double>& b) {
      try {
        return pearson(a, b);
      } catch (const EvalError&) {
        return std::nan("");
      }
    };
    const double rho = corr(all_p, all_g), dark = corr(dark_p, dark_g),
                 bright = corr(bright_p, bright_g);
    const bool ok = rho >= kHdrPearson && dark >= kHdrDecadePearson && bright >= kHdrDecadePearson;
    return {8, ok,
            "log Pearson " + fmt(rho) + " (>= 0.95), darkest decade " + fmt(dark) + " (" +
                std::to_string(dark_p.size()) + " px), brightest " + fmt(bright) + " (" +
                std::to_string(bright_p.size()) + " px) (>= 0.90), novel views"};
  }

  Line formats() {
    std::vector<std::string> failed;
    auto expect = [&](bool ok, const std::string& what) {
      if (!ok) failed.push_back(what);
    };
    const Simulation& sim = desk_sim();
    const fs::path dir = out_ / "formats";
    fs::create_directories(dir);

    write_events(dir / "events.txt", sim.stream);
    const EventStream ev = read_events(dir / "events.txt");
    expect(ev.events == sim.stream.events && ev.t_start == sim.stream.t_start &&
               ev.t_end == sim.stream.t_end,
           "events");
    write_poses(dir / "poses.txt", sim.keyframes);
    const auto poses = read_poses(dir / "poses.txt");
    bool poses_ok = poses.size() == sim.keyframes.size();
    for (std::size_t i = 0; poses_ok && i < poses.size(); ++i) {
      poses_ok = poses[i].t == sim.keyframes[i].t &&
                 poses[i].pose.translation() == sim.keyframes[i].pose.translation() &&
                 poses[i].pose.rotation().coeffs() == sim.keyframes[i].pose.rotation().coeffs();
    }
    expect(poses_ok, "poses");

    const ExperimentResult& r = desk();
    const auto bytes = serialize_checkpoint(r.model, &r.state);
    const Checkpoint back = deserialize_checkpoint(bytes);
    expect(back.state && serialize_checkpoint(back.model, &*back.state) == bytes, "checkpoint");

    const RenderedImage img = render_image(r.model, sim.intr, sim.keyframes[0].pose);
    write_evf(dir / "view.evf", {img.depth_norm, img.opacity});
    const auto evf = read_evf(dir / "view.evf");
    bool evf_ok = evf.size() == 2;
    for (std::size_t i = 0; evf_ok && i < img.opacity.size(); ++i) {
      evf_ok = evf[0][i] == static_cast<float>(img.depth_norm[i]) &&
               evf[1][i] == static_cast<float>(img.opacity[i]);
    }
    expect(evf_ok, "evf");
    const double scale = write_pgm16(dir / "a.pgm", img.intensity);
    const PgmImage q = read_pgm16(dir / "a.pgm");
    write_pgm16(dir / "b.pgm", q.image, scale);
    expect(read_pgm16(dir / "b.pgm").image == q.image, "pgm");
    const RunConfig cfg = desk_config();
    expect(format_config(parse_config(format_config(cfg))) == format_config(cfg), "config");

    // Second full run of criterion 4 with the same seed and worker count.
    train("desk_repeat", desk_config(), desk_sim());
    const bool same = read_bytes(out_ / "desk" / "checkpoint.evnf") ==
                      read_bytes(out_ / "desk_repeat" / "checkpoint.evnf");
    expect(same, "repeat checkpoint");
    std::string detail = "events, poses, checkpoint, evf, pgm, config round trips; repeat run " +
                         std::string(same ? "byte-identical" : "differs");
    if (!failed.empty()) {
      detail += "; failed:";
      for (const auto& f : failed) detail += " " + f;
    }
    return {9, failed.empty(), detail};
  }

 private:
  static double seconds_since(std::chrono::steady_clock::time_point t) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
  }

  const Simulation& desk_sim() {
    if (!desk_sim_) desk_sim_ = simulate(desk_config());
    return *desk_sim_;
  }

  const ExperimentResult& desk() {
    if (!desk_) {
      const auto start = std::chrono::steady_clock::now();
      desk_ = train("desk", desk_config(), desk_sim());
      desk_seconds_ = seconds_since(start);
    }
    return *desk_;
  }

  ExperimentResult train(const std::string& name, const RunConfig& cfg, const Simulation& sim) {
    FitOptions opts;
    opts.out_dir = out_ / name;
    opts.log_every = cfg.log_every;
    std::cerr << "[" << name << "] training " << cfg.train.iterations << " iterations\n";
    ExperimentResult r = run_experiment(cfg, sim, opts);
    std::ofstream report(opts.out_dir / "report.csv");
    report << report_csv_header() << '\n'
           << report_csv_row("train", r.eval.train) << '\n'
           << report_csv_row("novel", r.eval.novel) << '\n';
    std::ofstream ini(opts.out_dir / "run.ini");
    ini << format_config(cfg);
    std::cerr << "[" << name << "] " << report_summary("train", r.eval.train) << "; "
              << report_summary("novel", r.eval.novel) << " (" << fmt(r.train_seconds, 4)
              << " s)\n";
    return r;
  }

  fs::path out_;
  std::optional<Simulation> desk_sim_;
  std::optional<ExperimentResult> desk_;
  double desk_seconds_ = 0.0;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"evnerf acceptance suite"};
  std::string out = "acceptance";
  std::vector<int> only;
  app.add_option("--out", out, "directory for run artifacts");
  app.add_option("--only", only, "criteria to run (default: all)")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  Suite suite(out);
  const std::vector<std::pair<int, std::function<Line()>>> criteria{
      {1, [&] { return suite.gradients(); }},     {2, [&] { return suite.compositing(); }},
      {3, [&] { return suite.simulator(); }},     {4, [&] { return suite.reconstruction(); }},
      {5, [&] { return suite.noise(); }},         {6, [&] { return suite.thresholds(); }},
      {7, [&] { return suite.ablation(); }},      {8, [&] { return suite.hdr(); }},
      {9, [&] { return suite.formats(); }},
  };
  const std::set<int> wanted(only.begin(), only.end());
  std::vector<Line> lines;
  for (const auto& [id, run] : criteria) {
    if (!wanted.empty() && !wanted.count(id)) continue;
    Line line;
    try {
      line = run();
    } catch (const std::exception& e) {
      line = {id, false, std::string("error: ") + e.what()};
    }
    std::cout << "criterion " << line.id << ": " << (line.pass ? "PASS" : "FAIL") << "  "
              << line.detail << std::endl;
    lines.push_back(line);
  }
  std::ofstream summary(fs::path(out) / "summary.txt");
  int failed = 0;
  for (const Line& l : lines) {
    summary << "criterion " << l.id << ": " << (l.pass ? "PASS" : "FAIL") << "  " << l.detail
            << '\n';
    failed += !l.pass;
  }
  std::cout << lines.size() - failed << "/" << lines.size() << " criteria passed\n";
  return failed ? 1 : 0;
}
