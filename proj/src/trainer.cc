// Copyright 2026 The evnerf Authors
// SPDX-License-Identifier: Apache-2.0

#include "evnerf/trainer.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <string>
#include <exception>
#include <thread>

#include "evnerf/checkpoint.h"
#include "evnerf/errors.h"

namespace evnerf {

void TrainConfig::validate() const {
  adam.validate();
  if (batch_rays < 1) throw ConfigError("batch_rays must be >= 1");
  if (iterations < 0) throw ConfigError("iterations must be >= 0");
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
  if (!(noise_injection_ratio >= 0.0)) throw ConfigError("noise injection ratio must be >= 0");
  if (!(threshold_init > 0.0) || !(fixed_threshold > 0.0)) {
    throw ConfigError("threshold magnitudes must be positive");
  }
  if (!(clip_norm > 0.0)) throw ConfigError("clip_norm must be positive");
  if (!(density_noise >= 0.0)) throw ConfigError("density_noise must be >= 0");
  if (!(lr_final_factor > 0.0)) throw ConfigError("lr_final_factor must be positive");
  if (workers < 1) throw ConfigError("workers must be >= 1");
}

double TrainConfig::learning_rate_at(int iteration) const {
  if (lr_final_factor == 1.0 || iterations == 0) return adam.learning_rate;
  return adam.learning_rate *
         std::pow(lr_final_factor, static_cast<double>(iteration) / iterations);
}

void TrainingSet::validate() const {
  if (grids.empty()) throw ConfigError("training set needs at least one interval");
  if (poses.size() != grids.size() + 1) throw ConfigError("need one more pose than intervals");
  for (const EventCountGrid& g : grids) {
    if (g.n_pos.width() != intr.width || g.n_pos.height() != intr.height) {
      throw ConfigError("event grid size differs from the camera");
    }
  }
}

TrainingSet build_training_set(const EventStream& stream, const std::vector<StampedPose>& poses,
                               const CameraIntrinsics& intr, const TrainConfig& cfg) {
  if (poses.size() < 2) throw ConfigError("training needs at least 2 poses");
  if (stream.width != intr.width || stream.height != intr.height) {
    throw ConfigError("event stream size differs from the camera");
  }
  for (std::size_t j = 1; j < poses.size(); ++j) {
    if (!(poses[j].t > poses[j - 1].t)) {
      throw ConfigError("pose timestamps must be strictly increasing");
    }
  }
  TrainingSet set;
  set.poses = poses;
  set.intr = intr;
  const std::size_t n_int = poses.size() - 1;
  set.grids.reserve(n_int);
  for (std::size_t j = 0; j < n_int; ++j) {
    const double t0 = poses[j].t;
    const double t1 = poses[j + 1].t;
    EventStream slice = slice_events(stream, t0, t1);
    if (cfg.noise_injection_ratio > 0.0) {
      slice = inject_noise(slice, cfg.noise_injection_ratio,
                           Rng::stream(cfg.seed, 0x401e, j).next_u64());
    }
    const double times[2] = {t0, t1};
    EventCountGrid g = std::move(count_events(slice, times).front());
    g.index = static_cast<int>(j);
    set.grids.push_back(std::move(g));
  }
  return set;
}

std::vector<RayTuple> sample_batch(const TrainingSet& set, int batch_rays, Rng& rng) {
  if (batch_rays < 1) throw ArgumentError("batch_rays must be >= 1");
  const auto n_int = static_cast<std::uint64_t>(set.intervals());
  if (n_int == 0) throw ConfigError("training set has no intervals");
  std::vector<RayTuple> batch(static_cast<std::size_t>(batch_rays));
  for (RayTuple& t : batch) {
    t.interval = static_cast<int>(rng.uniform_index(n_int));
    t.u = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(set.intr.width)));
    t.v = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(set.intr.height)));
    const EventCountGrid& g = set.grids[t.interval];
    t.n_pos = g.n_pos(t.u, t.v);
    t.n_neg = g.n_neg(t.u, t.v);
  }
  return batch;
}

TrainState make_train_state(const Model& model) {
  return {Adam<float>(model.field.size()), Adam<double>(model.thresholds.raw().size()), 0};
}

Model init_model(const TrainingSet& set, const FieldConfig& field, const RenderSettings& render,
                 const TrainConfig& cfg) {
  const double b = cfg.joint_thresholds ? cfg.threshold_init : cfg.fixed_threshold;
  return make_model(field, render, set.intervals(), b, cfg.seed);
}

namespace {

// Runs fn(w) for w in [0, n); worker 0 runs on the calling thread.
template <typename Fn>
void run_workers(int n, Fn&& fn) {
  if (n == 1) {
    fn(0);
    return;
  }
  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(n - 1));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  for (int w = 1; w < n; ++w) {
    threads.emplace_back([&, w] {
      try {
        fn(w);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  try {
    fn(0);
  } catch (...) {
    errors[0] = std::current_exception();
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

StepResult train_step(const TrainingSet& set, Model& model, TrainState& state,
                      const TrainConfig& cfg) {
  StepResult result;
  const std::uint64_t it = state.iteration;
  Rng batch_rng = Rng::stream(cfg.seed, 0xba7c, it);
  const std::vector<RayTuple> batch = sample_batch(set, cfg.batch_rays, batch_rng);
  const std::uint64_t ray_seed = Rng::stream(cfg.seed, 0x5eed, it).next_u64();
  const int n = static_cast<int>(batch.size());
  const int workers = std::min(cfg.workers, n);

  // Ray 2k renders tuple k from T_j, ray 2k+1 from T_{j+1}. Both share key k, so the
  // two renders of a tuple see the same sample offsets and density noise.
  std::vector<Ray> rays(2 * batch.size());
  std::vector<std::uint64_t> keys(rays.size());
  for (int k = 0; k < n; ++k) {
    const RayTuple& t = batch[k];
    for (int side = 0; side < 2; ++side) {
      rays[2 * k + side] = ray_for_pixel(set.intr, set.poses[t.interval + side].pose, t.u, t.v,
                                         model.render.range);
      keys[2 * k + side] = static_cast<std::uint64_t>(k);
    }
  }
  auto chunk_begin = [&](int w) { return static_cast<std::size_t>(n) * w / workers; };

  std::vector<BatchRenderer> renderers(static_cast<std::size_t>(workers));
  run_workers(workers, [&](int w) {
    const std::size_t b = 2 * chunk_begin(w);
    const std::size_t e = 2 * chunk_begin(w + 1);
    renderers[w].forward(model, std::span<const Ray>(rays).subspan(b, e - b),
                         std::span<const std::uint64_t>(keys).subspan(b, e - b), ray_seed, true,
                         true, cfg.density_noise);
  });

  std::vector<RayTerm> terms(batch.size());
  for (int w = 0; w < workers; ++w) {
    const auto& res = renderers[w].results();
    for (std::size_t k = chunk_begin(w); k < chunk_begin(w + 1); ++k) {
      const std::size_t local = 2 * (k - chunk_begin(w));
      terms[k] = {batch[k].interval, res[local].intensity, res[local + 1].intensity,
                  batch[k].n_pos, batch[k].n_neg};
    }
  }
  const EventLossResult ev = event_render_loss(terms, model.thresholds);
  BoundLossResult bound;
  double lambda = 0.0;
  if (cfg.joint_thresholds) {
    bound = threshold_bound_loss(model.thresholds);
    lambda = cfg.lambda;
  }
  result.loss = combine_losses(ev, bound, lambda);
  if (!std::isfinite(result.loss.total)) {
    ++state.iteration;
    return result;
  }

  std::vector<FieldParams<float>> grads;
  grads.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) grads.emplace_back(model.field.config());
  run_workers(workers, [&](int w) {
    const std::size_t b = chunk_begin(w);
    const std::size_t e = chunk_begin(w + 1);
    std::vector<double> d_int(2 * (e - b));
    for (std::size_t k = b; k < e; ++k) {
      d_int[2 * (k - b)] = ev.d_i0[k];
      d_int[2 * (k - b) + 1] = ev.d_i1[k];
    }
    renderers[w].backward(d_int, grads[w]);
  });
  std::span<float> g = grads[0].values();
  for (int w = 1; w < workers; ++w) {
    const auto other = grads[w].values();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += other[i];
  }

  std::vector<double> g_thr(model.thresholds.raw().size(), 0.0);
  if (cfg.joint_thresholds) {
    for (std::size_t i = 0; i < g_thr.size(); ++i) {
      g_thr[i] = ev.d_raw[i] + lambda * bound.d_raw[i];
    }
  }

  double sq = 0.0;
  for (float x : g) sq += static_cast<double>(x) * x;
  for (double x : g_thr) sq += x * x;
  result.grad_norm = std::sqrt(sq);
  if (!std::isfinite(result.grad_norm)) {
    ++state.iteration;
    return result;
  }
  if (result.grad_norm > cfg.clip_norm) {
    const double scale = cfg.clip_norm / result.grad_norm;
    for (float& x : g) x = static_cast<float>(x * scale);
    for (double& x : g_thr) x *= scale;
  }

  const double lr = cfg.learning_rate_at(static_cast<int>(it));
  state.field_opt.step(model.field.values(), g, cfg.adam, lr);
  model.field.mark_modified();
  if (cfg.joint_thresholds) {
    state.threshold_opt.step(model.thresholds.raw(), g_thr, cfg.adam, lr);
    for (int j = 0; j < model.thresholds.intervals(); ++j) {
      if (!(model.thresholds.plus(j) > 0.0) || !(model.thresholds.minus(j) < 0.0)) {
        throw ContractError("threshold update left B+ > 0 > B- at interval " + std::to_string(j));
      }
    }
  }
  ++state.iteration;
  result.applied = true;
  return result;
}

namespace {

void write_threshold_header(std::ofstream& f, int intervals) {
  f << "iter";
  for (int j = 0; j < intervals; ++j) f << ",B_plus_" << j;
  for (int j = 0; j < intervals; ++j) f << ",B_minus_" << j;
  f << '\n';
}

std::ofstream open_log(const std::filesystem::path& path, bool append) {
  std::ofstream f(path, append ? std::ios::app : std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f.precision(9);
  return f;
}

}  // namespace

StepResult fit(const TrainingSet& set, Model& model, TrainState& state, const TrainConfig& cfg,
               const FitOptions& opts) {
  cfg.validate();
  set.validate();
  if (model.thresholds.intervals() != set.intervals()) {
    throw ConfigError("model thresholds do not match the training set's interval count");
  }
  const bool write = !opts.out_dir.empty();
  std::ofstream metrics, thresholds;
  if (write) {
    std::filesystem::create_directories(opts.out_dir);
    const auto mpath = opts.out_dir / "metrics.csv";
    const auto tpath = opts.out_dir / "thresholds.csv";
    const bool append = state.iteration > 0 && std::filesystem::exists(mpath);
    metrics = open_log(mpath, append);
    thresholds = open_log(tpath, append && std::filesystem::exists(tpath));
    if (!append) {
      metrics << "iter,event_loss,thres_loss,total,B_plus_mean,B_minus_mean,wall_ms\n";
      write_threshold_header(thresholds, set.intervals());
    }
  }
  const auto start = std::chrono::steady_clock::now();
  StepResult last;
  while (state.iteration < static_cast<std::uint64_t>(cfg.iterations)) {
    last = train_step(set, model, state, cfg);
    const std::uint64_t it = state.iteration;
    const bool log_now = opts.log_every > 0 &&
                         (it % static_cast<std::uint64_t>(opts.log_every) == 0 ||
                          it == static_cast<std::uint64_t>(cfg.iterations));
    if (log_now) {
      const double ms = std::chrono::duration<double, std::milli>(
                            std::chrono::steady_clock::now() - start).count();
      if (write) {
        metrics << it << ',' << last.loss.event_loss << ',' << last.loss.thres_loss << ','
                << last.loss.total << ',' << model.thresholds.mean_plus() << ','
                << model.thresholds.mean_minus() << ',' << static_cast<long long>(ms) << '\n'
                << std::flush;
        thresholds << it;
        for (int j = 0; j < set.intervals(); ++j) thresholds << ',' << model.thresholds.plus(j);
        for (int j = 0; j < set.intervals(); ++j) thresholds << ',' << model.thresholds.minus(j);
        thresholds << '\n' << std::flush;
        if (!metrics || !thresholds) throw std::runtime_error("write failed for training logs");
      }
      if (opts.on_log) opts.on_log(it, last);
    }
    if (write && opts.checkpoint_every > 0 &&
        it % static_cast<std::uint64_t>(opts.checkpoint_every) == 0) {
      save_checkpoint(opts.out_dir / ("checkpoint_" + std::to_string(it) + ".evnf"), model,
                      &state);
    }
  }
  if (write) save_checkpoint(opts.out_dir / "checkpoint.evnf", model, &state);
  return last;
}

}  // namespace evnerf
