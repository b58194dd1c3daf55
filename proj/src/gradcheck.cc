// Copyright 2026 The evnerf Authors
// SPDX-License-Identifier: Apache-2.0

#include "evnerf/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <optional>

#include "evnerf/event_loss.h"
#include "evnerf/field.h"
#include "evnerf/model.h"
#include "evnerf/renderer.h"
#include "evnerf/rng.h"
#include "evnerf/scene.h"

namespace evnerf {

namespace {

using MatrixD = FieldParams<double>::Matrix;

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

// Loss value plus an id of the smooth piece it was evaluated on (ReLU
// activation pattern, dead-zone and bound branches). Differences are only
// meaningful when every point of the stencil lies on the same piece.
struct Eval {
  double value = 0.0;
  std::vector<std::uint8_t> piece;
};
using Fn = std::function<Eval()>;

Fn smooth(std::function<double()> f) {
  return [f = std::move(f)] { return Eval{f(), {}}; };
}

// Central difference; near a kink, a one-sided second-order stencil on the
// side that stays on the piece; then smaller steps. nullopt if all fail.
std::optional<double> piece_derivative(double& x, double h, const Fn& f) {
  const double saved = x;
  auto at = [&](double offset) {
    x = saved + offset;
    Eval e = f();
    x = saved;
    return e;
  };
  const Eval base = at(0.0);
  for (int attempt = 0; attempt < 3; ++attempt, h *= 0.25) {
    const Eval up = at(h);
    const Eval down = at(-h);
    const bool up_ok = up.piece == base.piece;
    const bool down_ok = down.piece == base.piece;
    if (up_ok && down_ok) return (up.value - down.value) / (2.0 * h);
    if (up_ok) {
      const Eval up2 = at(2.0 * h);
      if (up2.piece == base.piece) return (-3.0 * base.value + 4.0 * up.value - up2.value) / (2.0 * h);
    }
    if (down_ok) {
      const Eval down2 = at(-2.0 * h);
      if (down2.piece == base.piece) {
        return (3.0 * base.value - 4.0 * down.value + down2.value) / (2.0 * h);
      }
    }
  }
  return std::nullopt;
}

class Tracker {
 public:
  Tracker(std::string suite, const GradcheckOptions& opts) : opts_(opts) {
    result_.suite = std::move(suite);
  }
  void add(const std::string& name, double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), opts_.floor});
    const double err = std::abs(analytic - numeric) / denom;
    ++result_.checked;
    if (!(err <= result_.max_rel_error)) {
      result_.max_rel_error = err;
      result_.worst = name + " analytic " + fmt(analytic) + " numeric " +
                      fmt(numeric);
    }
  }
  void check(const std::string& name, double analytic, double& x, const Fn& f) {
    if (const auto numeric = piece_derivative(x, opts_.step, f)) {
      add(name, analytic, *numeric);
    } else {
      ++result_.skipped;
    }
  }
  GradcheckResult finish() {
    result_.passed = result_.checked > 0 && result_.max_rel_error <= opts_.tolerance;
    return result_;
  }

 private:
  const GradcheckOptions& opts_;
  GradcheckResult result_;
};

GradcheckResult composite_suite(const GradcheckOptions& opts) {
  Rng rng = Rng::stream(opts.seed, 1);
  constexpr int n = 32;
  std::vector<double> s(n), sigma(n), y(n);
  for (int i = 0; i < n; ++i) s[i] = 1.0 + 4.0 * (i + rng.uniform()) / n;
  for (int i = 0; i < n; ++i) {
    sigma[i] = rng.uniform(0.1, 3.0);
    y[i] = rng.uniform(0.0, 2.0);
  }
  Ray ray;
  ray.near = 1.0;
  ray.far = 5.0;
  const RaySamples samples = make_samples(ray, s, 0.3);
  const double c_i = rng.uniform(-1.0, 1.0);
  const double c_d = rng.uniform(-1.0, 1.0);
  auto loss = [&] {
    const RenderResult r = composite(sigma, y, samples);
    return c_i * r.intensity + c_d * r.depth;
  };
  CompositeCache cache;
  composite(sigma, y, samples, &cache);
  const CompositeGrad g = composite_backward(cache, c_i, c_d);
  Tracker t("composite", opts);
  for (int i = 0; i < n; ++i) {
    t.check("sigma[" + std::to_string(i) + "]", g.d_sigma[i], sigma[i], smooth(loss));
    t.check("y[" + std::to_string(i) + "]", g.d_y[i], y[i], smooth(loss));
  }
  return t.finish();
}

// Thresholds on both sides of the bound so every branch of the bound loss
// is exercised.
ThresholdSet probe_thresholds() {
  ThresholdSet thr(3, 0.5, -0.5);
  thr.set(0, 0.25, -0.45);
  thr.set(1, 0.5, -0.2);
  thr.set(2, 0.35, -0.27);
  return thr;
}

constexpr double kLambda = 1000.0;

GradcheckResult event_loss_suite(const GradcheckOptions& opts) {
  Rng rng = Rng::stream(opts.seed, 2);
  ThresholdSet thr = probe_thresholds();
  std::vector<RayTerm> batch(12);
  for (std::size_t k = 0; k < batch.size(); ++k) {
    batch[k].interval = static_cast<int>(k % 3);
    batch[k].i0 = rng.uniform(0.05, 2.0);
    batch[k].i1 = rng.uniform(0.05, 2.0);
    batch[k].n_pos = static_cast<int>(rng.uniform_index(4));
    batch[k].n_neg = static_cast<int>(rng.uniform_index(4));
  }
  auto loss = [&] {
    const EventLossResult ev = event_render_loss(batch, thr);
    const BoundLossResult bound = threshold_bound_loss(thr);
    Eval e{ev.loss + kLambda * bound.loss, {}};
    for (double f : ev.residual) e.piece.push_back(f > 0.0 ? 2 : f < 0.0 ? 0 : 1);
    for (double d : bound.d_raw) e.piece.push_back(d != 0.0);
    return e;
  };
  const EventLossResult ev = event_render_loss(batch, thr);
  const BoundLossResult bound = threshold_bound_loss(thr);
  Tracker t("event_loss", opts);
  auto raw = thr.raw();
  for (std::size_t i = 0; i < raw.size(); ++i) {
    t.check("threshold_raw[" + std::to_string(i) + "]", ev.d_raw[i] + kLambda * bound.d_raw[i],
            raw[i], loss);
  }
  for (std::size_t k = 0; k < batch.size(); ++k) {
    t.check("i0[" + std::to_string(k) + "]", ev.d_i0[k], batch[k].i0, loss);
    t.check("i1[" + std::to_string(k) + "]", ev.d_i1[k], batch[k].i1, loss);
  }
  return t.finish();
}

// A ray with frozen samples, encodings and density noise, so the loss is a
// smooth function of the parameters alone.
struct FrozenRay {
  RaySamples samples;
  MatrixD x_enc, d_enc;
  std::vector<double> noise;
};

struct Problem {
  std::vector<RayTerm> terms;   // intensities filled at evaluation
  std::vector<FrozenRay> rays;  // 2 per term
};

Problem make_problem(const FieldParams<double>& params, int tuples, int n_coarse, int n_fine,
                     Rng& rng) {
  const AnalyticScene scene = builtin_scene("sphere_plane");
  const OrbitSetup orbit = default_orbit("sphere_plane");
  const std::vector<Pose> ring = orbit_trajectory(orbit.center, orbit.radius,
                                                  orbit.elevation_deg, 24);
  const CameraIntrinsics intr = CameraIntrinsics::centered(16, 16, 20.0);
  const FieldConfig& fc = params.config();
  RenderSettings rs;
  rs.range = scene.range;
  rs.bounds_center = scene.bounds_center;
  rs.bounds_half_extent = scene.bounds_half_extent;

  auto freeze = [&](const Ray& ray, const RaySamples& samples) {
    FrozenRay f;
    f.samples = samples;
    const auto m = static_cast<Eigen::Index>(samples.size());
    f.x_enc.resize(fc.pos_dim(), m);
    f.d_enc.resize(fc.dir_dim(), m);
    for (Eigen::Index i = 0; i < m; ++i) {
      encode_into<double>(rs.normalize(samples.x[i]), fc.encoding, EncodingKind::kPosition,
                          f.x_enc.col(i).data());
      encode_into<double>(ray.direction, fc.encoding, EncodingKind::kDirection,
                          f.d_enc.col(i).data());
      f.noise.push_back(rng.normal());
    }
    return f;
  };

  Problem p;
  for (int k = 0; k < tuples; ++k) {
    RayTerm term;
    term.interval = k % 3;
    term.n_pos = static_cast<int>(rng.uniform_index(4));
    term.n_neg = static_cast<int>(rng.uniform_index(4));
    const int u = static_cast<int>(rng.uniform_index(16));
    const int v = static_cast<int>(rng.uniform_index(16));
    for (int side = 0; side < 2; ++side) {
      const Ray ray = ray_for_pixel(intr, ring[(term.interval + side) % ring.size()], u, v,
                                    scene.range);
      const RaySamples coarse = sample_stratified(ray, n_coarse, rng, true);
      FrozenRay c = freeze(ray, coarse);
      const FieldOutputs<double> out =
          field_forward<double>(params, c.x_enc, c.d_enc, std::span<const double>(c.noise), nullptr);
      const std::vector<double> sigma(out.sigma.data(), out.sigma.data() + out.sigma.size());
      const std::vector<double> y(out.y.data(), out.y.data() + out.y.size());
      const RenderResult r = composite(sigma, y, coarse);
      const RaySamples merged = sample_importance(ray, coarse, r.weights, n_fine, rng);
      p.rays.push_back(freeze(ray, merged));
    }
    p.terms.push_back(term);
  }
  return p;
}

struct ProblemLoss {
  double event = 0.0;
  double bound = 0.0;
  std::vector<std::uint8_t> piece;
  double total() const { return event + kLambda * bound; }
};

void append_active(const MatrixD& m, std::vector<std::uint8_t>& piece) {
  for (Eigen::Index i = 0; i < m.size(); ++i) piece.push_back(m.data()[i] > 0.0);
}

ProblemLoss problem_loss(Problem& p, const FieldParams<double>& params, const ThresholdSet& thr,
                         FieldParams<double>* grad, std::vector<double>* thr_grad) {
  ProblemLoss result;
  std::vector<FieldCache<double>> fcache(p.rays.size());
  std::vector<CompositeCache> ccache(grad ? p.rays.size() : 0);
  for (std::size_t r = 0; r < p.rays.size(); ++r) {
    const FrozenRay& f = p.rays[r];
    const FieldOutputs<double> out = field_forward<double>(
        params, f.x_enc, f.d_enc, std::span<const double>(f.noise), &fcache[r]);
    for (const MatrixD& h : fcache[r].hidden) append_active(h, result.piece);
    append_active(fcache[r].view_hidden, result.piece);
    const std::vector<double> sigma(out.sigma.data(), out.sigma.data() + out.sigma.size());
    const std::vector<double> y(out.y.data(), out.y.data() + out.y.size());
    const double i = composite(sigma, y, f.samples, grad ? &ccache[r] : nullptr).intensity;
    (r % 2 == 0 ? p.terms[r / 2].i0 : p.terms[r / 2].i1) = i;
  }
  const EventLossResult ev = event_render_loss(p.terms, thr);
  const BoundLossResult bound = threshold_bound_loss(thr);
  for (double f : ev.residual) result.piece.push_back(f > 0.0 ? 2 : f < 0.0 ? 0 : 1);
  for (double d : bound.d_raw) result.piece.push_back(d != 0.0);
  if (grad) {
    for (std::size_t r = 0; r < p.rays.size(); ++r) {
      const double d_i = r % 2 == 0 ? ev.d_i0[r / 2] : ev.d_i1[r / 2];
      const CompositeGrad g = composite_backward(ccache[r], d_i, 0.0);
      field_backward<double>(fcache[r], g.d_sigma, g.d_y, *grad);
    }
    thr_grad->resize(ev.d_raw.size());
    for (std::size_t i = 0; i < ev.d_raw.size(); ++i) {
      (*thr_grad)[i] = ev.d_raw[i] + kLambda * bound.d_raw[i];
    }
  }
  result.event = ev.loss;
  result.bound = bound.loss;
  return result;
}

GradcheckResult field_suite(const std::string& name, const FieldConfig& fc, int tuples,
                            int n_coarse, int n_fine, int probes, const GradcheckOptions& opts) {
  Rng rng = Rng::stream(opts.seed, 3, fc.depth, fc.width);
  FieldParams<double> params(fc);
  params.initialize(rng);
  // Full-scale heads, so the outputs actually vary across samples.
  params.density_weight() *= 20.0;
  params.luminance_weight() *= 20.0;
  params.mark_modified();
  ThresholdSet thr = probe_thresholds();
  Problem p = make_problem(params, tuples, n_coarse, n_fine, rng);

  FieldParams<double> grad(fc);
  std::vector<double> thr_grad;
  problem_loss(p, params, thr, &grad, &thr_grad);
  // The bound term depends on thresholds only; leaving its (large, lambda-
  // weighted) constant out of the field differences keeps them precise.
  auto field_loss = [&] {
    ProblemLoss l = problem_loss(p, params, thr, nullptr, nullptr);
    return Eval{l.event, std::move(l.piece)};
  };
  auto loss = [&] {
    ProblemLoss l = problem_loss(p, params, thr, nullptr, nullptr);
    return Eval{l.total(), std::move(l.piece)};
  };

  Tracker t(name, opts);
  auto values = params.values();
  const auto g = grad.values();
  for (const auto& block : params.blocks()) {
    std::vector<std::size_t> idx(block.count);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (probes > 0 && block.count > static_cast<std::size_t>(probes)) {
      // Partial Fisher-Yates: the first `probes` entries become a random subset.
      for (int k = 0; k < probes; ++k) {
        const auto j = k + rng.uniform_index(block.count - k);
        std::swap(idx[k], idx[j]);
      }
      idx.resize(static_cast<std::size_t>(probes));
    }
    for (std::size_t i : idx) {
      const std::size_t at = block.offset + i;
      t.check(block.name + "[" + std::to_string(i) + "]", g[at], values[at], field_loss);
    }
  }
  auto raw = thr.raw();
  for (std::size_t i = 0; i < raw.size(); ++i) {
    t.check("threshold_raw[" + std::to_string(i) + "]", thr_grad[i], raw[i], loss);
  }
  return t.finish();
}

}  // namespace

std::vector<GradcheckResult> run_gradcheck(const GradcheckOptions& opts) {
  std::vector<GradcheckResult> out;
  out.push_back(composite_suite(opts));
  out.push_back(event_loss_suite(opts));
  FieldConfig small;
  small.depth = 2;
  small.width = 32;
  out.push_back(field_suite("field_2x32", small, 4, 16, 8, 0, opts));
  out.push_back(field_suite("field_default", FieldConfig{}, 2, 12, 6, opts.probes_per_block, opts));
  return out;
}

}  // namespace evnerf
