// Copyright 2026 The evnerf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "evnerf/geometry.h"
#include "evnerf/rng.h"

namespace evnerf {

/// Gap assigned to the last sample of a ray. A huge value makes the final
/// sample absorb all remaining transmittance, so every ray is fully composited.
inline constexpr double kDefaultDeltaMax = 1e10;
/// Floor on the weights before building the importance-sampling PDF.
inline constexpr double kImportanceWeightFloor = 1e-5;
/// Opacity floor used when normalizing depth.
inline constexpr double kOpacityFloor = 1e-10;

/// Points along one ray, sorted by distance.
struct RaySamples {
  std::vector<double> s;      // distance from the ray origin
  std::vector<double> delta;  // gap to the next sample; last entry is the tail gap
  std::vector<Vec3> x;        // world positions
  /// Index of each sample in the list the field was evaluated on. For merged
  /// coarse+fine samples: [0, n_coarse) are coarse, [n_coarse, ...) are fine.
  std::vector<int> source;

  std::size_t size() const { return s.size(); }
};

/// Builds samples from sorted distances. Gaps are s[i+1] - s[i]; the last gap
/// is `tail_delta`.
RaySamples make_samples(const Ray& ray, std::vector<double> s, double tail_delta,
                        std::vector<int> source = {});

/// N equal bins over [near, far]; one uniform draw per bin when `jitter`,
/// bin midpoints otherwise.
RaySamples sample_stratified(const Ray& ray, int n, Rng& rng, bool jitter,
                             double delta_max = kDefaultDeltaMax);

/// Draws `n_fine` distances from the piecewise-constant PDF proportional to
/// (w_i + floor) over the cells around the coarse samples, then returns the
/// sorted union with the coarse samples. Falls back to stratified draws when
/// every weight is zero.
RaySamples sample_importance(const Ray& ray, const RaySamples& coarse,
                             std::span<const double> weights, int n_fine, Rng& rng,
                             double delta_max = kDefaultDeltaMax);

/// Fine distances only (sorted), as drawn by sample_importance.
std::vector<double> draw_importance(const Ray& ray, const RaySamples& coarse,
                                    std::span<const double> weights, int n_fine, Rng& rng);

/// Sorted union of coarse and fine distances with duplicate spacing below
/// 1e-12 removed. `source` indexes into [coarse..., fine...].
RaySamples merge_samples(const Ray& ray, const RaySamples& coarse,
                         std::span<const double> fine, double delta_max = kDefaultDeltaMax);

struct RenderResult {
  double intensity = 0.0;
  double depth = 0.0;       // sum_i w_i s_i
  double depth_norm = 0.0;  // depth / max(opacity, floor)
  double opacity = 0.0;     // sum_i w_i
  std::vector<double> weights;
};

/// Everything composite_backward needs. Filled by composite().
struct CompositeCache {
  std::vector<double> sigma, y, s, delta;
  std::vector<double> transmittance;  // A_i, before sample i
  std::vector<double> weights;        // A_i * alpha_i
  bool valid = false;
};

/// Front-to-back alpha compositing of luminance and depth.
RenderResult composite(std::span<const double> sigma, std::span<const double> y,
                       const RaySamples& samples, CompositeCache* cache = nullptr);

struct CompositeGrad {
  std::vector<double> d_sigma;
  std::vector<double> d_y;
};

/// Reverse-mode gradients of (intensity, depth) with respect to sigma and y.
CompositeGrad composite_backward(const CompositeCache& cache, double d_intensity,
                                 double d_depth);

}  // namespace evnerf
