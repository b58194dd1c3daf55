// Copyright 2026 The evnerf Authors
// SPDX-License-Identifier: Apache-2.0

#include "evnerf/field.h"

#include <cmath>
#include <numbers>
#include <string>

#include "evnerf/errors.h"

namespace evnerf {

void EncodingConfig::validate() const {
  if (freq_pos < 1) throw ConfigError("position encoding needs at least 1 frequency");
  if (freq_dir < 0) throw ConfigError("direction frequency count must be >= 0");
}

template <typename Scalar>
void encode_into(const Vec3& x, const EncodingConfig& cfg, EncodingKind kind, Scalar* out) {
  int k = 0;
  if (cfg.include_raw) {
    for (int c = 0; c < 3; ++c) out[k++] = static_cast<Scalar>(x[c]);
  }
  const int n_freq = cfg.frequencies(kind);
  double scale = std::numbers::pi;
  for (int l = 0; l < n_freq; ++l, scale *= 2.0) {
    for (int c = 0; c < 3; ++c) out[k++] = static_cast<Scalar>(std::sin(scale * x[c]));
    for (int c = 0; c < 3; ++c) out[k++] = static_cast<Scalar>(std::cos(scale * x[c]));
  }
}

std::vector<double> encode(const Vec3& x, const EncodingConfig& cfg, EncodingKind kind) {
  if (!x.allFinite()) throw ArgumentError("encode: non-finite input");
  std::vector<double> out(cfg.dim(kind));
  encode_into(x, cfg, kind, out.data());
  return out;
}

template void encode_into<float>(const Vec3&, const EncodingConfig&, EncodingKind, float*);
template void encode_into<double>(const Vec3&, const EncodingConfig&, EncodingKind, double*);

void FieldConfig::validate() const {
  encoding.validate();
  if (depth < 1 || width < 2) throw ConfigError("field needs depth >= 1 and width >= 2");
  if (!(sigma_init > 0.0) || !(luminance_prior > 0.0)) {
    throw ConfigError("initial density and luminance must be positive");
  }
}

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double inverse_softplus(double y) {
  if (!(y > 0.0)) throw ArgumentError("inverse_softplus needs y > 0");
  // log(exp(y) - 1), stable for large y
  return y > 30.0 ? y : std::log(std::expm1(y));
}

namespace {

template <typename Derived>
auto softplus_array(const Eigen::MatrixBase<Derived>& z) {
  using S = typename Derived::Scalar;
  return (z.array().max(S(0)) + (-(z.array().abs())).exp().log1p()).matrix();
}

template <typename Derived>
auto sigmoid_array(const Eigen::MatrixBase<Derived>& z) {
  using S = typename Derived::Scalar;
  // exp(-|z|) keeps both branches finite.
  const auto e = (-(z.array().abs())).exp();
  return (z.array() >= S(0)).select(S(1) / (S(1) + e), e / (S(1) + e)).matrix();
}

}  // namespace

template <typename Scalar>
FieldParams<Scalar>::FieldParams(const FieldConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  for (int l = 0; l < cfg_.depth; ++l) {
    trunk_w_.push_back(add_block(cfg_.width, cfg_.layer_inputs(l)));
    trunk_b_.push_back(add_block(cfg_.width, 1));
  }
  density_w_ = add_block(1, cfg_.width);
  density_b_ = add_block(1, 1);
  feature_w_ = add_block(cfg_.width, cfg_.width);
  feature_b_ = add_block(cfg_.width, 1);
  view_w_ = add_block(cfg_.view_width(), cfg_.width + cfg_.dir_dim());
  view_b_ = add_block(cfg_.view_width(), 1);
  lum_w_ = add_block(1, cfg_.view_width());
  lum_b_ = add_block(1, 1);
}

template <typename Scalar>
typename FieldParams<Scalar>::Block FieldParams<Scalar>::add_block(int rows, int cols) {
  Block b{data_.size(), rows, cols};
  data_.resize(data_.size() + static_cast<std::size_t>(rows) * cols, Scalar(0));
  return b;
}

template <typename Scalar>
void FieldParams<Scalar>::set_zero() {
  std::fill(data_.begin(), data_.end(), Scalar(0));
  mark_modified();
}

template <typename Scalar>
void FieldParams<Scalar>::initialize(Rng& rng) {
  auto fill_uniform = [&](MatrixMap m, double bound) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        m(i, j) = static_cast<Scalar>(rng.uniform(-bound, bound));
      }
    }
  };
  auto he = [](Eigen::Index fan_in) { return std::sqrt(6.0 / static_cast<double>(fan_in)); };
  set_zero();
  for (int l = 0; l < cfg_.depth; ++l) fill_uniform(trunk_weight(l), he(trunk_weight(l).cols()));
  fill_uniform(feature_weight(), std::sqrt(3.0 / cfg_.width));
  fill_uniform(view_weight(), he(view_weight().cols()));
  // Small heads: the initial field is nearly uniform at (sigma_init, prior).
  constexpr double kHeadScale = 0.05;
  fill_uniform(density_weight(), kHeadScale * he(cfg_.width));
  fill_uniform(luminance_weight(), kHeadScale * he(cfg_.view_width()));
  density_bias()(0, 0) = static_cast<Scalar>(inverse_softplus(cfg_.sigma_init));
  luminance_bias()(0, 0) = static_cast<Scalar>(inverse_softplus(cfg_.luminance_prior));
  mark_modified();
}

template <typename Scalar>
std::vector<typename FieldParams<Scalar>::BlockInfo> FieldParams<Scalar>::blocks() const {
  std::vector<BlockInfo> out;
  auto add = [&](std::string name, const Block& b) {
    out.push_back({std::move(name), b.offset, static_cast<std::size_t>(b.rows) * b.cols});
  };
  for (int l = 0; l < cfg_.depth; ++l) {
    add("trunk" + std::to_string(l) + ".weight", trunk_w_[l]);
    add("trunk" + std::to_string(l) + ".bias", trunk_b_[l]);
  }
  add("density.weight", density_w_);
  add("density.bias", density_b_);
  add("feature.weight", feature_w_);
  add("feature.bias", feature_b_);
  add("view.weight", view_w_);
  add("view.bias", view_b_);
  add("luminance.weight", lum_w_);
  add("luminance.bias", lum_b_);
  return out;
}

template <typename Scalar>
template <typename Other>
FieldParams<Other> FieldParams<Scalar>::cast() const {
  FieldParams<Other> out(cfg_);
  auto dst = out.values();
  for (std::size_t i = 0; i < data_.size(); ++i) dst[i] = static_cast<Other>(data_[i]);
  out.mark_modified();
  return out;
}

template <typename Scalar>
FieldOutputs<Scalar> field_forward(const FieldParams<Scalar>& params,
                                   const typename FieldParams<Scalar>::Matrix& x_enc,
                                   const typename FieldParams<Scalar>::Matrix& d_enc,
                                   std::span<const Scalar> density_noise,
                                   FieldCache<Scalar>* cache) {
  using Matrix = typename FieldParams<Scalar>::Matrix;
  const FieldConfig& cfg = params.config();
  const Eigen::Index m = x_enc.cols();
  if (x_enc.rows() != cfg.pos_dim() || d_enc.rows() != cfg.dir_dim() || d_enc.cols() != m) {
    throw ConfigError("field_forward: encoding dimensions do not match the field");
  }
  if (!density_noise.empty() && static_cast<Eigen::Index>(density_noise.size()) != m) {
    throw ConfigError("field_forward: density noise length differs from batch size");
  }
  const int w = cfg.width;

  std::vector<Matrix> local_hidden;
  std::vector<Matrix>& hidden = cache ? cache->hidden : local_hidden;
  hidden.resize(cfg.depth);
  for (int l = 0; l < cfg.depth; ++l) {
    const auto weight = params.trunk_weight(l);
    Matrix& h = hidden[l];
    if (l == 0) {
      h.noalias() = weight * x_enc;
    } else if (l == FieldConfig::kSkipLayer) {
      h.noalias() = weight.leftCols(w) * hidden[l - 1];
      h.noalias() += weight.rightCols(cfg.pos_dim()) * x_enc;
    } else {
      h.noalias() = weight * hidden[l - 1];
    }
    h.colwise() += params.trunk_bias(l).col(0);
    h = h.cwiseMax(Scalar(0));
  }
  const Matrix& top = hidden.back();

  FieldOutputs<Scalar> out;
  Eigen::Matrix<Scalar, 1, Eigen::Dynamic> sigma_pre =
      (params.density_weight() * top).array() + params.density_bias()(0, 0);
  if (!density_noise.empty()) {
    sigma_pre += Eigen::Map<const Eigen::Matrix<Scalar, 1, Eigen::Dynamic>>(density_noise.data(), m);
  }

  Matrix feature = params.feature_weight() * top;
  feature.colwise() += params.feature_bias().col(0);
  Matrix view_hidden = params.view_weight().leftCols(w) * feature;
  view_hidden.noalias() += params.view_weight().rightCols(cfg.dir_dim()) * d_enc;
  view_hidden.colwise() += params.view_bias().col(0);
  view_hidden = view_hidden.cwiseMax(Scalar(0));
  Eigen::Matrix<Scalar, 1, Eigen::Dynamic> y_pre =
      (params.luminance_weight() * view_hidden).array() + params.luminance_bias()(0, 0);

  out.sigma = softplus_array(sigma_pre);
  out.y = softplus_array(y_pre);

  if (cache) {
    cache->x_enc = x_enc;
    cache->d_enc = d_enc;
    cache->feature = std::move(feature);
    cache->view_hidden = std::move(view_hidden);
    cache->sigma_pre = std::move(sigma_pre);
    cache->y_pre = std::move(y_pre);
    cache->params = &params;
    cache->generation = params.generation();
    cache->valid = true;
  }
  return out;
}

template <typename Scalar>
FieldOutputs<Scalar> field_forward(const FieldParams<Scalar>& params,
                                   const typename FieldParams<Scalar>::Matrix& x_enc,
                                   const typename FieldParams<Scalar>::Matrix& d_enc,
                                   bool train_mode, Rng& rng, FieldCache<Scalar>* cache) {
  std::vector<Scalar> noise;
  if (train_mode) {
    noise.resize(static_cast<std::size_t>(x_enc.cols()));
    for (Scalar& e : noise) e = static_cast<Scalar>(rng.normal());
  }
  return field_forward<Scalar>(params, x_enc, d_enc, std::span<const Scalar>(noise), cache);
}

template <typename Scalar>
FieldOutput field_forward(const FieldParams<Scalar>& params, std::span<const double> x_enc,
                          std::span<const double> d_enc, bool train_mode, Rng& rng,
                          FieldCache<Scalar>* cache) {
  using Matrix = typename FieldParams<Scalar>::Matrix;
  Matrix x(static_cast<Eigen::Index>(x_enc.size()), 1);
  Matrix d(static_cast<Eigen::Index>(d_enc.size()), 1);
  for (std::size_t i = 0; i < x_enc.size(); ++i) x(static_cast<Eigen::Index>(i), 0) = static_cast<Scalar>(x_enc[i]);
  for (std::size_t i = 0; i < d_enc.size(); ++i) d(static_cast<Eigen::Index>(i), 0) = static_cast<Scalar>(d_enc[i]);
  const FieldOutputs<Scalar> o = field_forward(params, x, d, train_mode, rng, cache);
  return {static_cast<double>(o.sigma(0)), static_cast<double>(o.y(0))};
}

template <typename Scalar>
void field_backward(const FieldCache<Scalar>& cache, std::span<const Scalar> d_sigma,
                    std::span<const Scalar> d_y, FieldParams<Scalar>& grad,
                    FieldInputGrads<Scalar>* input_grads) {
  using Matrix = typename FieldParams<Scalar>::Matrix;
  using Row = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
  if (!cache.valid || cache.params == nullptr) {
    throw ContractError("field_backward: cache was not filled by field_forward");
  }
  const FieldParams<Scalar>& params = *cache.params;
  if (params.generation() != cache.generation) {
    throw ContractError("field_backward: parameters changed since the forward pass");
  }
  const FieldConfig& cfg = params.config();
  if (!(grad.config() == cfg)) throw ConfigError("field_backward: gradient layout mismatch");
  const Eigen::Index m = cache.samples();
  if (static_cast<Eigen::Index>(d_sigma.size()) != m || static_cast<Eigen::Index>(d_y.size()) != m) {
    throw ConfigError("field_backward: cotangent length differs from batch size");
  }
  const int w = cfg.width;

  const Row g_sigma = Eigen::Map<const Row>(d_sigma.data(), m).cwiseProduct(sigmoid_array(cache.sigma_pre));
  const Row g_y = Eigen::Map<const Row>(d_y.data(), m).cwiseProduct(sigmoid_array(cache.y_pre));

  grad.luminance_weight().noalias() += g_y * cache.view_hidden.transpose();
  grad.luminance_bias()(0, 0) += g_y.sum();
  Matrix g_view = params.luminance_weight().transpose() * g_y;
  g_view = (cache.view_hidden.array() > Scalar(0)).select(g_view, Scalar(0));

  grad.view_weight().leftCols(w).noalias() += g_view * cache.feature.transpose();
  grad.view_weight().rightCols(cfg.dir_dim()).noalias() += g_view * cache.d_enc.transpose();
  grad.view_bias().col(0) += g_view.rowwise().sum();
  const Matrix g_feature = params.view_weight().leftCols(w).transpose() * g_view;
  if (input_grads) {
    input_grads->d_enc = params.view_weight().rightCols(cfg.dir_dim()).transpose() * g_view;
    input_grads->x_enc = Matrix::Zero(cfg.pos_dim(), m);
  }

  const Matrix& top = cache.hidden.back();
  grad.feature_weight().noalias() += g_feature * top.transpose();
  grad.feature_bias().col(0) += g_feature.rowwise().sum();
  grad.density_weight().noalias() += g_sigma * top.transpose();
  grad.density_bias()(0, 0) += g_sigma.sum();

  Matrix g_hidden = params.feature_weight().transpose() * g_feature;
  g_hidden.noalias() += params.density_weight().transpose() * g_sigma;

  for (int l = cfg.depth - 1; l >= 0; --l) {
    const Matrix& h = cache.hidden[l];
    const Matrix g_pre = (h.array() > Scalar(0)).select(g_hidden, Scalar(0));
    auto gw = grad.trunk_weight(l);
    const auto weight = params.trunk_weight(l);
    grad.trunk_bias(l).col(0) += g_pre.rowwise().sum();
    if (l == 0) {
      gw.noalias() += g_pre * cache.x_enc.transpose();
      if (input_grads) input_grads->x_enc.noalias() += weight.transpose() * g_pre;
    } else if (l == FieldConfig::kSkipLayer) {
      gw.leftCols(w).noalias() += g_pre * cache.hidden[l - 1].transpose();
      gw.rightCols(cfg.pos_dim()).noalias() += g_pre * cache.x_enc.transpose();
      if (input_grads) {
        input_grads->x_enc.noalias() += weight.rightCols(cfg.pos_dim()).transpose() * g_pre;
      }
      g_hidden.noalias() = weight.leftCols(w).transpose() * g_pre;
    } else {
      gw.noalias() += g_pre * cache.hidden[l - 1].transpose();
      g_hidden.noalias() = weight.transpose() * g_pre;
    }
  }
}

#define EVNERF_INSTANTIATE_FIELD(S)                                                           \
  template class FieldParams<S>;                                                              \
  template FieldOutputs<S> field_forward<S>(const FieldParams<S>&,                            \
                                            const FieldParams<S>::Matrix&,                    \
                                            const FieldParams<S>::Matrix&,                    \
                                            std::span<const S>, FieldCache<S>*);              \
  template FieldOutputs<S> field_forward<S>(const FieldParams<S>&,                            \
                                            const FieldParams<S>::Matrix&,                    \
                                            const FieldParams<S>::Matrix&, bool, Rng&,        \
                                            FieldCache<S>*);                                  \
  template FieldOutput field_forward<S>(const FieldParams<S>&, std::span<const double>,       \
                                        std::span<const double>, bool, Rng&, FieldCache<S>*); \
  template void field_backward<S>(const FieldCache<S>&, std::span<const S>,                   \
                                  std::span<const S>, FieldParams<S>&, FieldInputGrads<S>*);

EVNERF_INSTANTIATE_FIELD(float)
EVNERF_INSTANTIATE_FIELD(double)
#undef EVNERF_INSTANTIATE_FIELD

template FieldParams<double> FieldParams<float>::cast<double>() const;
template FieldParams<float> FieldParams<double>::cast<float>() const;
template FieldParams<float> FieldParams<float>::cast<float>() const;
template FieldParams<double> FieldParams<double>::cast<double>() const;

}  // namespace evnerf
