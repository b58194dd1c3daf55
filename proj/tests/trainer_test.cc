// Copyright 2026 The evnerf Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "evnerf/adam.h"
#include "evnerf/checkpoint.h"
#include "evnerf/config.h"
#include "evnerf/errors.h"
#include "evnerf/pipeline.h"
#include "evnerf/trainer.h"
#include "testing.h"

namespace evnerf {
namespace {

RunConfig tiny_config(const std::string& scene = "slab") {
  RunConfig cfg;
  cfg.scene.name = scene;
  cfg.camera = {16, 16, 18.0};
  cfg.sim.intervals = 8;
  cfg.sim.fps = 96;  // 4 sub-frames per interval
  cfg.sim.gt_steps = 64;
  cfg.field.depth = 2;
  cfg.field.width = 32;
  cfg.field.encoding.freq_pos = 4;
  cfg.field.encoding.freq_dir = 2;
  cfg.n_coarse = 16;
  cfg.n_fine = 8;
  cfg.train.batch_rays = 32;
  cfg.train.iterations = 10;
  return cfg;
}

const Simulation& tiny_simulation() {
  static const Simulation sim = simulate(tiny_config());
  return sim;
}

struct Setup {
  TrainingSet set;
  Model model;
  TrainState state;
};

Setup make_setup(const RunConfig& cfg) {
  const Simulation& sim = tiny_simulation();
  Setup s;
  s.set = build_training_set(sim.stream, sim.keyframes, sim.intr, cfg.train);
  s.model = init_model(s.set, cfg.field, render_settings(sim.scene, cfg), cfg.train);
  s.state = make_train_state(s.model);
  return s;
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

// Static view: every interval starts and ends at the same pose and saw no events.
TrainingSet static_set(int intervals, int size) {
  TrainingSet set;
  set.intr = CameraIntrinsics::centered(size, size, size);
  const Pose pose = Pose::look_at(Vec3(4, 0, 2), Vec3::Zero());
  for (int j = 0; j <= intervals; ++j) set.poses.push_back({0.1 * j, pose});
  for (int j = 0; j < intervals; ++j) {
    EventCountGrid g;
    g.n_pos = CountGrid(size, size, 0);
    g.n_neg = CountGrid(size, size, 0);
    g.index = j;
    set.grids.push_back(g);
  }
  return set;
}

}  // namespace

TEST_CASE("training defaults") {
  const TrainConfig cfg;
  CHECK(cfg.adam.learning_rate == 5e-4);
  CHECK(cfg.adam.beta1 == 0.9);
  CHECK(cfg.adam.beta2 == 0.999);
  CHECK(cfg.adam.eps == 1e-8);
  CHECK(cfg.lambda == 1000.0);
  CHECK(cfg.noise_injection_ratio == 0.05);
  CHECK(cfg.joint_thresholds);
  CHECK(cfg.clip_norm == 10.0);
  CHECK(cfg.learning_rate_at(1234) == cfg.adam.learning_rate);
  TrainConfig decay;
  decay.iterations = 100;
  decay.lr_final_factor = 0.1;
  CHECK(decay.learning_rate_at(100) == doctest::Approx(5e-5));
  CHECK(decay.learning_rate_at(50) == doctest::Approx(5e-4 * std::sqrt(0.1)));
  TrainConfig bad;
  bad.batch_rays = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = TrainConfig{};
  bad.adam.beta1 = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("Adam matches the textbook update") {
  Rng rng(1);
  const AdamConfig cfg;
  std::vector<double> p(6), ref(6), m(6, 0.0), v(6, 0.0);
  for (std::size_t i = 0; i < 6; ++i) p[i] = ref[i] = rng.uniform(-1, 1);
  Adam<double> opt(6);
  for (int t = 1; t <= 50; ++t) {
    std::vector<double> g(6);
    for (double& x : g) x = rng.normal();
    opt.step(p, g, cfg);
    for (std::size_t i = 0; i < 6; ++i) {
      m[i] = cfg.beta1 * m[i] + (1 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1 - cfg.beta2) * g[i] * g[i];
      const double mh = m[i] / (1 - std::pow(cfg.beta1, t));
      const double vh = v[i] / (1 - std::pow(cfg.beta2, t));
      ref[i] -= cfg.learning_rate * mh / (std::sqrt(vh) + cfg.eps);
    }
    for (std::size_t i = 0; i < 6; ++i) REQUIRE(p[i] == doctest::Approx(ref[i]).epsilon(1e-10));
  }
  CHECK(opt.steps() == 50);
  // First step moves every coordinate by about lr against its gradient sign.
  Adam<float> f(2);
  std::vector<float> q{0.0f, 0.0f};
  f.step(q, std::vector<float>{3.0f, -0.01f}, cfg);
  CHECK(q[0] == doctest::Approx(-5e-4).epsilon(1e-3));
  CHECK(q[1] == doctest::Approx(5e-4).epsilon(1e-3));
}

TEST_CASE("training set slices, injects noise and counts") {
  const Simulation& sim = tiny_simulation();
  TrainConfig cfg;
  cfg.noise_injection_ratio = 0.0;
  const TrainingSet clean = build_training_set(sim.stream, sim.keyframes, sim.intr, cfg);
  REQUIRE(clean.intervals() == 8);
  std::vector<double> times;
  for (const auto& k : sim.keyframes) times.push_back(k.t);
  const auto direct = count_events(sim.stream, times);
  for (int j = 0; j < 8; ++j) {
    CHECK(clean.grids[j].n_pos == direct[j].n_pos);
    CHECK(clean.grids[j].n_neg == direct[j].n_neg);
  }
  CHECK_THROWS_AS(build_training_set(sim.stream, {sim.keyframes[0]}, sim.intr, cfg), ConfigError);
  CameraIntrinsics other = sim.intr;
  other.width = 17;
  CHECK_THROWS_AS(build_training_set(sim.stream, sim.keyframes, other, cfg), ConfigError);
}

TEST_CASE("five percent noise injection on a 10 000-event slice") {
  EventStream s;
  s.width = s.height = 10;
  s.t_start = 0;
  s.t_end = 1;
  Rng rng(3);
  for (int i = 0; i < 10000; ++i) {
    s.events.push_back({rng.uniform(0, 1), static_cast<int>(rng.uniform_index(10)),
                        static_cast<int>(rng.uniform_index(10)), 1});
  }
  std::sort(s.events.begin(), s.events.end(), event_before);
  const std::vector<StampedPose> poses{{0.0, Pose()}, {1.0, Pose()}};
  TrainConfig cfg;
  const TrainingSet set = build_training_set(s, poses, CameraIntrinsics::centered(10, 10, 5), cfg);
  long total = 0;
  for (int c : set.grids[0].n_pos.values()) total += c;
  for (int c : set.grids[0].n_neg.values()) total += c;
  CHECK(total == 10500);
}

TEST_CASE("batches cover intervals uniformly and stay on the sensor") {
  const Setup s = make_setup(tiny_config());
  Rng rng(4);
  const auto one = sample_batch(s.set, 1, rng);
  REQUIRE(one.size() == 1);
  CHECK(one[0].interval >= 0);
  CHECK(one[0].interval < 8);

  std::vector<double> hist(8, 0.0);
  const int draws = 100000;
  for (const RayTuple& t : sample_batch(s.set, draws, rng)) {
    REQUIRE(t.u >= 0);
    REQUIRE(t.u < 16);
    REQUIRE(t.v >= 0);
    REQUIRE(t.v < 16);
    REQUIRE(t.n_pos == s.set.grids[t.interval].n_pos(t.u, t.v));
    REQUIRE(t.n_neg == s.set.grids[t.interval].n_neg(t.u, t.v));
    hist[t.interval] += 1;
  }
  double chi2 = 0;
  for (double h : hist) chi2 += (h - draws / 8.0) * (h - draws / 8.0) / (draws / 8.0);
  CHECK(chi2 < 18.48);  // chi-square, 7 dof, alpha = 0.01
  CHECK_THROWS_AS(sample_batch(s.set, 0, rng), ArgumentError);
}

TEST_CASE("a static, event-free batch only moves thresholds under an active bound") {
  const TrainingSet set = static_set(3, 6);
  FieldConfig fc;
  fc.depth = 2;
  fc.width = 16;
  RenderSettings rs;
  rs.range = {1.0, 7.0};
  rs.bounds_half_extent = 4.0;
  rs.n_coarse = 8;
  rs.n_fine = 4;
  TrainConfig cfg;
  cfg.batch_rays = 16;

  Model model = make_model(fc, rs, 3, 0.5, 1);
  TrainState state = make_train_state(model);
  const Model before = model;
  const StepResult r = train_step(set, model, state, cfg);
  CHECK(r.applied);
  CHECK(r.loss.event_loss == 0.0);
  CHECK(r.loss.thres_loss == 0.0);
  CHECK(std::equal(model.field.values().begin(), model.field.values().end(),
                   before.field.values().begin()));
  CHECK(model.thresholds == before.thresholds);

  Model low = make_model(fc, rs, 3, 0.2, 1);
  TrainState low_state = make_train_state(low);
  const Model low_before = low;
  const StepResult lr = train_step(set, low, low_state, cfg);
  CHECK(lr.loss.event_loss == 0.0);
  CHECK(lr.loss.thres_loss == doctest::Approx(6 * 0.1));
  CHECK(std::equal(low.field.values().begin(), low.field.values().end(),
                   low_before.field.values().begin()));
  for (int j = 0; j < 3; ++j) {
    CHECK(low.thresholds.plus(j) > 0.2);
    CHECK(low.thresholds.minus(j) < -0.2);
  }
}

TEST_CASE("non-finite losses skip the update") {
  Setup s = make_setup(tiny_config());
  s.model.field.luminance_bias()(0, 0) = std::numeric_limits<float>::quiet_NaN();
  s.model.field.mark_modified();
  const Model before = s.model;
  const StepResult r = train_step(s.set, s.model, s.state, tiny_config().train);
  CHECK_FALSE(r.applied);
  CHECK(s.state.iteration == 1);
  CHECK(s.state.field_opt.steps() == 0);
  CHECK(s.model.thresholds == before.thresholds);
}

TEST_CASE("loss decreases over the first 200 steps on the slab") {
  std::vector<double> ratios;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    RunConfig cfg = tiny_config();
    cfg.train.seed = seed;
    cfg.train.adam.learning_rate = 2e-3;
    cfg.train.iterations = 200;
    Setup s = make_setup(cfg);
    std::vector<double> losses;
    FitOptions opts;
    opts.log_every = 1;
    opts.on_log = [&](std::uint64_t, const StepResult& r) {
      losses.push_back(r.loss.total);
      for (int j = 0; j < s.model.thresholds.intervals(); ++j) {
        REQUIRE(s.model.thresholds.plus(j) > 0.0);
        REQUIRE(s.model.thresholds.minus(j) < 0.0);
      }
    };
    fit(s.set, s.model, s.state, cfg.train, opts);
    REQUIRE(losses.size() == 200);
    double first = 0, last = 0;
    for (int k = 0; k < 40; ++k) {
      first += losses[k];
      last += losses[160 + k];
    }
    ratios.push_back(last / first);
  }
  std::sort(ratios.begin(), ratios.end());
  INFO("median last/first loss ratio " << ratios[2]);
  CHECK(ratios[2] < 0.9);
}

TEST_CASE("fixed thresholds: no bound term, thresholds frozen, loss still decreases") {
  RunConfig cfg = tiny_config();
  cfg.train.joint_thresholds = false;
  cfg.train.noise_injection_ratio = 0.0;
  cfg.train.adam.learning_rate = 2e-3;
  cfg.train.iterations = 200;
  Setup s = make_setup(cfg);
  CHECK(s.model.thresholds.plus(0) == doctest::Approx(0.3));
  CHECK(s.model.thresholds.minus(0) == doctest::Approx(-0.3));
  const ThresholdSet initial = s.model.thresholds;
  double first = 0, last = 0;
  FitOptions opts;
  opts.log_every = 1;
  opts.on_log = [&](std::uint64_t it, const StepResult& r) {
    CHECK(r.loss.thres_loss == 0.0);
    if (it <= 40) first += r.loss.event_loss;
    if (it > 160) last += r.loss.event_loss;
  };
  fit(s.set, s.model, s.state, cfg.train, opts);
  CHECK(s.model.thresholds == initial);
  CHECK(last < first);
}

TEST_CASE("zero iterations checkpoint the initialization") {
  testing::TempDir dir("fit0");
  RunConfig cfg = tiny_config();
  cfg.train.iterations = 0;
  Setup s = make_setup(cfg);
  const Model init = s.model;
  FitOptions opts;
  opts.out_dir = dir.path();
  fit(s.set, s.model, s.state, cfg.train, opts);
  const Checkpoint c = load_checkpoint(dir / "checkpoint.evnf");
  CHECK(std::equal(c.model.field.values().begin(), c.model.field.values().end(),
                   init.field.values().begin(), init.field.values().end()));
  CHECK(c.model.thresholds == init.thresholds);
  REQUIRE(c.state.has_value());
  CHECK(c.state->iteration == 0);
  std::ifstream log(dir / "metrics.csv");
  std::string header;
  std::getline(log, header);
  CHECK(header == "iter,event_loss,thres_loss,total,B_plus_mean,B_minus_mean,wall_ms");
}

TEST_CASE("fixed seed and worker count reproduce checkpoints bit for bit") {
  for (int workers : {1, 3}) {
    testing::TempDir a("repro_a"), b("repro_b");
    RunConfig cfg = tiny_config();
    cfg.train.workers = workers;
    cfg.train.iterations = 12;
    for (const auto* dir : {&a, &b}) {
      Setup s = make_setup(cfg);
      FitOptions opts;
      opts.out_dir = dir->path();
      fit(s.set, s.model, s.state, cfg.train, opts);
    }
    CHECK(read_bytes(a / "checkpoint.evnf") == read_bytes(b / "checkpoint.evnf"));
  }
}

TEST_CASE("a resumed run bit-matches an uninterrupted one") {
  testing::TempDir straight("straight"), split("split");
  RunConfig cfg = tiny_config();
  cfg.train.iterations = 14;
  {
    Setup s = make_setup(cfg);
    FitOptions opts;
    opts.out_dir = straight.path();
    opts.log_every = 2;
    opts.checkpoint_every = 6;
    fit(s.set, s.model, s.state, cfg.train, opts);
  }
  {
    RunConfig first = cfg;
    first.train.iterations = 6;
    Setup s = make_setup(first);
    FitOptions opts;
    opts.out_dir = split.path();
    opts.log_every = 2;
    fit(s.set, s.model, s.state, first.train, opts);
  }
  {
    Checkpoint c = load_checkpoint(split / "checkpoint.evnf");
    REQUIRE(c.state.has_value());
    CHECK(c.state->iteration == 6);
    const Setup fresh = make_setup(cfg);
    FitOptions opts;
    opts.out_dir = split.path();
    opts.log_every = 2;
    fit(fresh.set, c.model, *c.state, cfg.train, opts);
  }
  CHECK(read_bytes(straight / "checkpoint.evnf") == read_bytes(split / "checkpoint.evnf"));
  CHECK(read_bytes(straight / "checkpoint_6.evnf").size() > 0);

  // The split logs equal the straight logs apart from wall time.
  auto rows = [](const std::filesystem::path& p) {
    std::ifstream f(p);
    std::vector<std::string> out;
    for (std::string line; std::getline(f, line);) out.push_back(line.substr(0, line.rfind(',')));
    return out;
  };
  CHECK(rows(straight / "metrics.csv") == rows(split / "metrics.csv"));
  std::ifstream t1(straight / "thresholds.csv"), t2(split / "thresholds.csv");
  std::stringstream s1, s2;
  s1 << t1.rdbuf();
  s2 << t2.rdbuf();
  CHECK(s1.str() == s2.str());
}

TEST_CASE("checkpoints round trip and reject corruption") {
  RunConfig cfg = tiny_config();
  cfg.train.iterations = 3;
  Setup s = make_setup(cfg);
  fit(s.set, s.model, s.state, cfg.train);
  const auto bytes = serialize_checkpoint(s.model, &s.state);
  const Checkpoint c = deserialize_checkpoint(bytes);
  CHECK(c.model.field.config() == s.model.field.config());
  CHECK(std::equal(c.model.field.values().begin(), c.model.field.values().end(),
                   s.model.field.values().begin(), s.model.field.values().end()));
  CHECK(c.model.thresholds == s.model.thresholds);
  CHECK(c.model.render == s.model.render);
  REQUIRE(c.state.has_value());
  CHECK(*c.state == s.state);
  CHECK(serialize_checkpoint(c.model, &*c.state) == bytes);

  const auto bare = serialize_checkpoint(s.model, nullptr);
  CHECK_FALSE(deserialize_checkpoint(bare).state.has_value());
  CHECK(bare[0] == 'E');
  CHECK(bare[1] == 'V');
  CHECK(bare[2] == 'N');
  CHECK(bare[3] == 'F');

  auto flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x40;
  CHECK_THROWS_AS(deserialize_checkpoint(flipped), DataError);
  auto truncated = bytes;
  truncated.resize(bytes.size() - 9);
  CHECK_THROWS_AS(deserialize_checkpoint(truncated), DataError);
  auto magic = bytes;
  magic[0] = 'X';
  CHECK_THROWS_AS(deserialize_checkpoint(magic), DataError);
  CHECK_THROWS_AS(deserialize_checkpoint({}), DataError);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/c.evnf"), DataError);
}

}  // namespace evnerf
