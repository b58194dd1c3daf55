// Copyright 2026 The evnerf Authors
// SPDX-License-Identifier: Apache-2.0

#include "evnerf/renderer.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "evnerf/errors.h"

namespace evnerf {

RaySamples make_samples(const Ray& ray, std::vector<double> s, double tail_delta,
                        std::vector<int> source) {
  RaySamples out;
  const std::size_t n = s.size();
  out.delta.resize(n);
  out.x.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.delta[i] = i + 1 < n ? s[i + 1] - s[i] : tail_delta;
    out.x[i] = ray.at(s[i]);
  }
  if (source.empty()) {
    source.resize(n);
    std::iota(source.begin(), source.end(), 0);
  }
  out.s = std::move(s);
  out.source = std::move(source);
  return out;
}

RaySamples sample_stratified(const Ray& ray, int n, Rng& rng, bool jitter, double delta_max) {
  if (n < 2) throw ArgumentError("stratified sampling needs at least 2 samples");
  const double width = (ray.far - ray.near) / n;
  std::vector<double> s(n);
  for (int i = 0; i < n; ++i) {
    const double offset = jitter ? rng.uniform() : 0.5;
    s[i] = ray.near + (i + offset) * width;
  }
  return make_samples(ray, std::move(s), delta_max);
}

std::vector<double> draw_importance(const Ray& ray, const RaySamples& coarse,
                                    std::span<const double> weights, int n_fine, Rng& rng) {
  const std::size_t n = coarse.size();
  if (weights.size() != n) throw ArgumentError("weights and samples differ in length");
  if (n == 0 || n_fine <= 0) return {};
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw ArgumentError("importance weights must be non-negative");
    total += w;
  }
  std::vector<double> fine(n_fine);
  if (total <= 0.0) {
    const double width = (ray.far - ray.near) / n_fine;
    for (int i = 0; i < n_fine; ++i) fine[i] = ray.near + (i + rng.uniform()) * width;
    return fine;
  }

  // Cell i spans the midpoints around coarse sample i, clipped to [near, far].
  std::vector<double> edges(n + 1);
  edges[0] = ray.near;
  edges[n] = ray.far;
  for (std::size_t i = 1; i < n; ++i) edges[i] = 0.5 * (coarse.s[i - 1] + coarse.s[i]);

  std::vector<double> cdf(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) cdf[i + 1] = cdf[i] + weights[i] + kImportanceWeightFloor;
  const double mass = cdf[n];

  for (int k = 0; k < n_fine; ++k) {
    const double u = rng.uniform() * mass;
    auto it = std::upper_bound(cdf.begin() + 1, cdf.end(), u);
    std::size_t cell = static_cast<std::size_t>(it - cdf.begin()) - 1;
    cell = std::min(cell, n - 1);
    const double in_cell = (u - cdf[cell]) / (cdf[cell + 1] - cdf[cell]);
    fine[k] = edges[cell] + std::clamp(in_cell, 0.0, 1.0) * (edges[cell + 1] - edges[cell]);
  }
  std::sort(fine.begin(), fine.end());
  return fine;
}

RaySamples merge_samples(const Ray& ray, const RaySamples& coarse, std::span<const double> fine,
                         double delta_max) {
  const int n_coarse = static_cast<int>(coarse.size());
  std::vector<std::pair<double, int>> all;
  all.reserve(coarse.size() + fine.size());
  for (int i = 0; i < n_coarse; ++i) all.emplace_back(coarse.s[i], i);
  for (std::size_t k = 0; k < fine.size(); ++k) {
    all.emplace_back(fine[k], n_coarse + static_cast<int>(k));
  }
  std::sort(all.begin(), all.end());
  std::vector<double> s;
  std::vector<int> source;
  s.reserve(all.size());
  source.reserve(all.size());
  for (const auto& [dist, idx] : all) {
    if (!s.empty() && dist - s.back() < 1e-12) continue;
    s.push_back(dist);
    source.push_back(idx);
  }
  return make_samples(ray, std::move(s), delta_max, std::move(source));
}

RaySamples sample_importance(const Ray& ray, const RaySamples& coarse,
                             std::span<const double> weights, int n_fine, Rng& rng,
                             double delta_max) {
  const std::vector<double> fine = draw_importance(ray, coarse, weights, n_fine, rng);
  return merge_samples(ray, coarse, fine, delta_max);
}

RenderResult composite(std::span<const double> sigma, std::span<const double> y,
                       const RaySamples& samples, CompositeCache* cache) {
  const std::size_t n = samples.size();
  if (sigma.size() != n || y.size() != n) {
    throw ArgumentError("composite: sigma, y and samples must have equal lengths");
  }
  RenderResult r;
  r.weights.resize(n);
  if (cache) {
    cache->sigma.assign(sigma.begin(), sigma.end());
    cache->y.assign(y.begin(), y.end());
    cache->s = samples.s;
    cache->delta = samples.delta;
    cache->transmittance.resize(n);
  }
  double optical_depth = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (sigma[i] < 0.0) throw ContractError("composite: negative density");
    const double trans = std::exp(-optical_depth);
    const double tau = sigma[i] * samples.delta[i];
    const double alpha = -std::expm1(-tau);
    const double w = trans * alpha;
    r.weights[i] = w;
    r.intensity += w * y[i];
    r.depth += w * samples.s[i];
    r.opacity += w;
    optical_depth += tau;
    if (cache) cache->transmittance[i] = trans;
  }
  r.depth_norm = r.depth / std::max(r.opacity, kOpacityFloor);
  if (cache) {
    cache->weights = r.weights;
    cache->valid = true;
  }
  return r;
}

CompositeGrad composite_backward(const CompositeCache& cache, double d_intensity, double d_depth) {
  if (!cache.valid) throw ContractError("composite_backward: cache not filled by composite()");
  const std::size_t n = cache.sigma.size();
  if (cache.y.size() != n || cache.weights.size() != n || cache.transmittance.size() != n) {
    throw ContractError("composite_backward: inconsistent cache");
  }
  CompositeGrad g;
  g.d_sigma.assign(n, 0.0);
  g.d_y.resize(n);
  // dL/dtau_k = A_{k+1} c_k - sum_{i>k} w_i c_i, with c_i = dI * y_i + dD * s_i.
  double suffix = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    const double c = d_intensity * cache.y[k] + d_depth * cache.s[k];
    g.d_y[k] = d_intensity * cache.weights[k];
    const double trans_after = cache.transmittance[k] * std::exp(-cache.sigma[k] * cache.delta[k]);
    const double d_tau = trans_after * c - suffix;
    g.d_sigma[k] = d_tau == 0.0 ? 0.0 : d_tau * cache.delta[k];
    suffix += cache.weights[k] * c;
  }
  return g;
}

}  // namespace evnerf
