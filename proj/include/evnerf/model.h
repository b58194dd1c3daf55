// Copyright 2026 The evnerf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "evnerf/event_loss.h"
#include "evnerf/field.h"
#include "evnerf/geometry.h"
#include "evnerf/image.h"
#include "evnerf/renderer.h"

namespace evnerf {

/// How rays are sampled and positions normalized before encoding.
struct RenderSettings {
  DepthRange range;
  Vec3 bounds_center = Vec3::Zero();
  double bounds_half_extent = 1.0;
  int n_coarse = 64;
  int n_fine = 64;
  double delta_max = kDefaultDeltaMax;

  void validate() const;
  Vec3 normalize(const Vec3& x) const { return (x - bounds_center) / bounds_half_extent; }
  bool operator==(const RenderSettings&) const = default;
};

struct Model {
  FieldParams<float> field;
  ThresholdSet thresholds;
  RenderSettings render;
};

/// Fresh model: initialized field, thresholds at +-threshold_init.
Model make_model(const FieldConfig& field, const RenderSettings& render, int intervals,
                 double threshold_init, std::uint64_t seed);

/// Coarse pass, importance draws, then a fine pass over the merged samples,
/// with each pass evaluated as one batched field call. The merged composite
/// reuses the coarse evaluations, so the fine pass only evaluates new points.
/// Every ray draws from its own stream Rng::stream(seed, key), so regrouping
/// rays into batches changes results only by float rounding.
class BatchRenderer {
 public:
  /// Renders `rays`. In `train` mode samples are jittered and Gaussian noise
  /// of std `noise_std` is added to the raw density; with `keep_cache` the
  /// activations are kept for backward().
  const std::vector<RenderResult>& forward(const Model& model, std::span<const Ray> rays,
                                           std::span<const std::uint64_t> keys,
                                           std::uint64_t seed, bool train, bool keep_cache,
                                           double noise_std = 1.0);

  /// Accumulates d(sum_r d_intensity[r] * I_r)/dtheta into `grad`.
  void backward(std::span<const double> d_intensity, FieldParams<float>& grad);

  const std::vector<RenderResult>& results() const { return results_; }

 private:
  using Matrix = FieldParams<float>::Matrix;
  Matrix coarse_x_, coarse_d_, fine_x_, fine_d_;
  FieldCache<float> coarse_cache_, fine_cache_;
  std::vector<CompositeCache> composite_;
  std::vector<RaySamples> merged_;
  std::vector<RenderResult> results_;
  int n_coarse_ = 0;
  int n_fine_ = 0;
  bool has_cache_ = false;
};

struct RenderedImage {
  Image intensity;
  Image depth;
  Image depth_norm;
  Image opacity;
};

/// Evaluation-mode render (no density noise, no jitter). Importance draws use
/// a per-pixel stream of `seed`, so the output is deterministic.
RenderedImage render_image(const Model& model, const CameraIntrinsics& intr, const Pose& pose,
                           std::uint64_t seed = 0);

}  // namespace evnerf
