// Copyright 2026 The evnerf Authors
// SPDX-License-Identifier: Apache-2.0

#include "evnerf/model.h"

#include <algorithm>

#include "evnerf/errors.h"

namespace evnerf {

void RenderSettings::validate() const {
  if (!(range.near > 0.0 && range.near < range.far)) {
    throw ConfigError("render range must satisfy 0 < near < far");
  }
  if (!(bounds_half_extent > 0.0)) throw ConfigError("scene bounds must have positive extent");
  if (n_coarse < 2) throw ConfigError("need at least 2 coarse samples per ray");
  if (n_fine < 0) throw ConfigError("fine sample count must be >= 0");
  if (!(delta_max > 0.0)) throw ConfigError("delta_max must be positive");
}

Model make_model(const FieldConfig& field, const RenderSettings& render, int intervals,
                 double threshold_init, std::uint64_t seed) {
  render.validate();
  Model m{FieldParams<float>(field), ThresholdSet(intervals, threshold_init, -threshold_init),
          render};
  Rng rng = Rng::stream(seed, 0x1417);
  m.field.initialize(rng);
  return m;
}

namespace {

void encode_column(const Vec3& x, const EncodingConfig& enc, EncodingKind kind,
                   FieldParams<float>::Matrix& m, Eigen::Index col) {
  encode_into<float>(x, enc, kind, m.col(col).data());
}

}  // namespace

const std::vector<RenderResult>& BatchRenderer::forward(const Model& model,
                                                        std::span<const Ray> rays,
                                                        std::span<const std::uint64_t> keys,
                                                        std::uint64_t seed, bool train,
                                                        bool keep_cache, double noise_std) {
  if (keys.size() != rays.size()) throw ArgumentError("one key per ray required");
  const RenderSettings& rs = model.render;
  const FieldConfig& fc = model.field.config();
  const EncodingConfig& enc = fc.encoding;
  const auto n = static_cast<Eigen::Index>(rays.size());
  n_coarse_ = rs.n_coarse;
  n_fine_ = rs.n_fine;
  const Eigen::Index nc = n_coarse_;
  const Eigen::Index nf = n_fine_;

  std::vector<Rng> rngs;
  rngs.reserve(rays.size());
  std::vector<RaySamples> coarse(rays.size());
  coarse_x_.resize(fc.pos_dim(), n * nc);
  coarse_d_.resize(fc.dir_dim(), n * nc);
  std::vector<float> noise(train ? static_cast<std::size_t>(n * nc) : 0);
  for (Eigen::Index r = 0; r < n; ++r) {
    rngs.push_back(Rng::stream(seed, keys[r]));
    Rng& rng = rngs.back();
    const Ray& ray = rays[r];
    coarse[r] = sample_stratified(ray, n_coarse_, rng, train, rs.delta_max);
    encode_column(ray.direction, enc, EncodingKind::kDirection, coarse_d_, r * nc);
    for (Eigen::Index i = 0; i < nc; ++i) {
      encode_column(rs.normalize(coarse[r].x[i]), enc, EncodingKind::kPosition, coarse_x_,
                    r * nc + i);
      if (i > 0) coarse_d_.col(r * nc + i) = coarse_d_.col(r * nc);
      if (train) noise[r * nc + i] = static_cast<float>(noise_std * rng.normal());
    }
  }
  const FieldOutputs<float> co = field_forward<float>(
      model.field, coarse_x_, coarse_d_, std::span<const float>(noise),
      keep_cache ? &coarse_cache_ : nullptr);

  results_.assign(rays.size(), {});
  composite_.assign(keep_cache ? rays.size() : 0, {});
  merged_.assign(rays.size(), {});
  std::vector<double> sigma, y;

  if (nf == 0) {
    for (Eigen::Index r = 0; r < n; ++r) {
      sigma.assign(co.sigma.data() + r * nc, co.sigma.data() + (r + 1) * nc);
      y.assign(co.y.data() + r * nc, co.y.data() + (r + 1) * nc);
      results_[r] = composite(sigma, y, coarse[r], keep_cache ? &composite_[r] : nullptr);
      merged_[r] = std::move(coarse[r]);
    }
    has_cache_ = keep_cache;
    return results_;
  }

  fine_x_.resize(fc.pos_dim(), n * nf);
  fine_d_.resize(fc.dir_dim(), n * nf);
  std::vector<float> fine_noise(train ? static_cast<std::size_t>(n * nf) : 0);
  for (Eigen::Index r = 0; r < n; ++r) {
    Rng& rng = rngs[r];
    const Ray& ray = rays[r];
    sigma.assign(co.sigma.data() + r * nc, co.sigma.data() + (r + 1) * nc);
    y.assign(co.y.data() + r * nc, co.y.data() + (r + 1) * nc);
    const RenderResult cr = composite(sigma, y, coarse[r]);
    const std::vector<double> fine = draw_importance(ray, coarse[r], cr.weights, n_fine_, rng);
    for (Eigen::Index k = 0; k < nf; ++k) {
      encode_column(rs.normalize(ray.at(fine[k])), enc, EncodingKind::kPosition, fine_x_,
                    r * nf + k);
      fine_d_.col(r * nf + k) = coarse_d_.col(r * nc);
      if (train) fine_noise[r * nf + k] = static_cast<float>(noise_std * rng.normal());
    }
    merged_[r] = merge_samples(ray, coarse[r], fine, rs.delta_max);
  }
  const FieldOutputs<float> fo = field_forward<float>(
      model.field, fine_x_, fine_d_, std::span<const float>(fine_noise),
      keep_cache ? &fine_cache_ : nullptr);

  for (Eigen::Index r = 0; r < n; ++r) {
    const RaySamples& m = merged_[r];
    sigma.resize(m.size());
    y.resize(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) {
      const Eigen::Index src = m.source[i];
      if (src < nc) {
        sigma[i] = co.sigma(r * nc + src);
        y[i] = co.y(r * nc + src);
      } else {
        sigma[i] = fo.sigma(r * nf + src - nc);
        y[i] = fo.y(r * nf + src - nc);
      }
    }
    results_[r] = composite(sigma, y, m, keep_cache ? &composite_[r] : nullptr);
  }
  has_cache_ = keep_cache;
  return results_;
}

void BatchRenderer::backward(std::span<const double> d_intensity, FieldParams<float>& grad) {
  if (!has_cache_) throw ContractError("BatchRenderer::backward without a cached forward pass");
  if (d_intensity.size() != composite_.size()) {
    throw ArgumentError("one intensity cotangent per ray required");
  }
  const std::size_t nc = static_cast<std::size_t>(n_coarse_);
  const std::size_t nf = static_cast<std::size_t>(n_fine_);
  const std::size_t n = composite_.size();
  std::vector<float> dc_sigma(n * nc, 0.0f), dc_y(n * nc, 0.0f);
  std::vector<float> df_sigma(n * nf, 0.0f), df_y(n * nf, 0.0f);
  for (std::size_t r = 0; r < n; ++r) {
    if (d_intensity[r] == 0.0) continue;
    const CompositeGrad g = composite_backward(composite_[r], d_intensity[r], 0.0);
    const RaySamples& m = merged_[r];
    for (std::size_t i = 0; i < m.size(); ++i) {
      const auto src = static_cast<std::size_t>(m.source[i]);
      if (src < nc) {
        dc_sigma[r * nc + src] += static_cast<float>(g.d_sigma[i]);
        dc_y[r * nc + src] += static_cast<float>(g.d_y[i]);
      } else {
        df_sigma[r * nf + src - nc] += static_cast<float>(g.d_sigma[i]);
        df_y[r * nf + src - nc] += static_cast<float>(g.d_y[i]);
      }
    }
  }
  field_backward<float>(coarse_cache_, dc_sigma, dc_y, grad);
  if (nf > 0) field_backward<float>(fine_cache_, df_sigma, df_y, grad);
}

RenderedImage render_image(const Model& model, const CameraIntrinsics& intr, const Pose& pose,
                           std::uint64_t seed) {
  intr.validate();
  const int w = intr.width;
  const int h = intr.height;
  RenderedImage out{Image(w, h), Image(w, h), Image(w, h), Image(w, h)};
  constexpr int kChunk = 512;
  const int total = w * h;
  BatchRenderer renderer;
  std::vector<Ray> rays;
  std::vector<std::uint64_t> keys;
  for (int start = 0; start < total; start += kChunk) {
    const int stop = std::min(total, start + kChunk);
    rays.clear();
    keys.clear();
    for (int p = start; p < stop; ++p) {
      rays.push_back(ray_for_pixel(intr, pose, p % w, p / w, model.render.range));
      keys.push_back(static_cast<std::uint64_t>(p));
    }
    const auto& res = renderer.forward(model, rays, keys, seed, false, false);
    for (int p = start; p < stop; ++p) {
      const RenderResult& r = res[p - start];
      out.intensity[p] = r.intensity;
      out.depth[p] = r.depth;
      out.depth_norm[p] = r.depth_norm;
      out.opacity[p] = r.opacity;
    }
  }
  return out;
}

}  // namespace evnerf
