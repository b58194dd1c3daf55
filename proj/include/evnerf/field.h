// Copyright 2026 The evnerf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "evnerf/geometry.h"
#include "evnerf/rng.h"

namespace evnerf {

enum class EncodingKind { kPosition, kDirection };

struct EncodingConfig {
  int freq_pos = 10;
  int freq_dir = 4;
  bool include_raw = true;

  int frequencies(EncodingKind kind) const {
    return kind == EncodingKind::kPosition ? freq_pos : freq_dir;
  }
  int dim(EncodingKind kind) const { return (include_raw ? 3 : 0) + 6 * frequencies(kind); }
  void validate() const;
  bool operator==(const EncodingConfig&) const = default;
};

/// [x] ++ [sin(2^l pi x), cos(2^l pi x)] for l = 0..L-1, each block componentwise.
std::vector<double> encode(const Vec3& x, const EncodingConfig& cfg, EncodingKind kind);

/// Same layout as encode(), written into `out` (length cfg.dim(kind)).
template <typename Scalar>
void encode_into(const Vec3& x, const EncodingConfig& cfg, EncodingKind kind, Scalar* out);

/// Trunk of `depth` ReLU layers of `width`, with the position encoding
/// concatenated back in at kSkipLayer; a linear density head; a linear
/// feature layer feeding a (feature, direction) ReLU branch of width/2 and a
/// linear luminance head. Both outputs go through softplus.
struct FieldConfig {
  static constexpr int kSkipLayer = 5;

  EncodingConfig encoding;
  int depth = 8;
  int width = 256;
  double sigma_init = 0.1;       // initial density, 1/scene-unit
  double luminance_prior = 0.5;  // initial luminance

  int view_width() const { return width / 2; }
  int pos_dim() const { return encoding.dim(EncodingKind::kPosition); }
  int dir_dim() const { return encoding.dim(EncodingKind::kDirection); }
  int layer_inputs(int layer) const {
    if (layer == 0) return pos_dim();
    return layer == kSkipLayer ? width + pos_dim() : width;
  }
  void validate() const;
  bool operator==(const FieldConfig&) const = default;
};

double softplus(double z);
double sigmoid(double z);
/// softplus^-1, for placing initial outputs.
double inverse_softplus(double y);

/// Flat parameter (or gradient) storage with matrix views per layer. Weights
/// are column-major [out x in].
template <typename Scalar>
class FieldParams {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using MatrixMap = Eigen::Map<Matrix>;
  using ConstMatrixMap = Eigen::Map<const Matrix>;

  FieldParams() = default;
  /// All-zero parameters with the layout of `cfg`.
  explicit FieldParams(const FieldConfig& cfg);

  /// He-uniform trunk, small heads biased to sigma_init / luminance_prior.
  void initialize(Rng& rng);

  const FieldConfig& config() const { return cfg_; }
  std::span<Scalar> values() { return data_; }
  std::span<const Scalar> values() const { return data_; }
  std::size_t size() const { return data_.size(); }

  // Layer views. Indices: trunk 0..depth-1.
  MatrixMap trunk_weight(int l) { return map(trunk_w_[l]); }
  MatrixMap trunk_bias(int l) { return map(trunk_b_[l]); }
  MatrixMap density_weight() { return map(density_w_); }
  MatrixMap density_bias() { return map(density_b_); }
  MatrixMap feature_weight() { return map(feature_w_); }
  MatrixMap feature_bias() { return map(feature_b_); }
  MatrixMap view_weight() { return map(view_w_); }
  MatrixMap view_bias() { return map(view_b_); }
  MatrixMap luminance_weight() { return map(lum_w_); }
  MatrixMap luminance_bias() { return map(lum_b_); }
  ConstMatrixMap trunk_weight(int l) const { return map(trunk_w_[l]); }
  ConstMatrixMap trunk_bias(int l) const { return map(trunk_b_[l]); }
  ConstMatrixMap density_weight() const { return map(density_w_); }
  ConstMatrixMap density_bias() const { return map(density_b_); }
  ConstMatrixMap feature_weight() const { return map(feature_w_); }
  ConstMatrixMap feature_bias() const { return map(feature_b_); }
  ConstMatrixMap view_weight() const { return map(view_w_); }
  ConstMatrixMap view_bias() const { return map(view_b_); }
  ConstMatrixMap luminance_weight() const { return map(lum_w_); }
  ConstMatrixMap luminance_bias() const { return map(lum_b_); }

  /// (name, offset, count) of every parameter block, in storage order.
  struct BlockInfo {
    std::string name;
    std::size_t offset;
    std::size_t count;
  };
  std::vector<BlockInfo> blocks() const;

  void set_zero();
  /// Bumped by every mutation made through mark_modified(); caches compare it.
  std::uint64_t generation() const { return generation_; }
  void mark_modified() { ++generation_; }

  template <typename Other>
  FieldParams<Other> cast() const;

 private:
  struct Block {
    std::size_t offset = 0;
    int rows = 0;
    int cols = 0;
  };
  Block add_block(int rows, int cols);
  MatrixMap map(const Block& b) { return MatrixMap(data_.data() + b.offset, b.rows, b.cols); }
  ConstMatrixMap map(const Block& b) const {
    return ConstMatrixMap(data_.data() + b.offset, b.rows, b.cols);
  }

  FieldConfig cfg_;
  // Aligned storage: Eigen peels unaligned heads in products, so a varying base
  // address would change the rounding from run to run.
  std::vector<Scalar, Eigen::aligned_allocator<Scalar>> data_;
  std::vector<Block> trunk_w_, trunk_b_;
  Block density_w_, density_b_, feature_w_, feature_b_, view_w_, view_b_, lum_w_, lum_b_;
  std::uint64_t generation_ = 0;
};

/// Activations saved by field_forward for field_backward. Columns are samples.
template <typename Scalar>
struct FieldCache {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Row = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

  Matrix x_enc, d_enc;
  std::vector<Matrix> hidden;  // trunk outputs after ReLU
  Matrix feature;
  Matrix view_hidden;
  Row sigma_pre;  // raw density + noise
  Row y_pre;      // raw luminance
  const FieldParams<Scalar>* params = nullptr;
  std::uint64_t generation = 0;
  bool valid = false;

  Eigen::Index samples() const { return x_enc.cols(); }
};

template <typename Scalar>
struct FieldOutputs {
  Eigen::Matrix<Scalar, 1, Eigen::Dynamic> sigma;
  Eigen::Matrix<Scalar, 1, Eigen::Dynamic> y;
};

/// Batched forward pass. `x_enc` is pos_dim x M, `d_enc` dir_dim x M. When
/// `density_noise` is non-empty (length M) it is added to the raw density
/// before softplus; pass an empty span for evaluation.
template <typename Scalar>
FieldOutputs<Scalar> field_forward(const FieldParams<Scalar>& params,
                                   const typename FieldParams<Scalar>::Matrix& x_enc,
                                   const typename FieldParams<Scalar>::Matrix& d_enc,
                                   std::span<const Scalar> density_noise,
                                   FieldCache<Scalar>* cache);

/// Batched forward that draws unit Gaussian density noise from `rng`
/// (column order) when `train_mode`.
template <typename Scalar>
FieldOutputs<Scalar> field_forward(const FieldParams<Scalar>& params,
                                   const typename FieldParams<Scalar>::Matrix& x_enc,
                                   const typename FieldParams<Scalar>::Matrix& d_enc,
                                   bool train_mode, Rng& rng, FieldCache<Scalar>* cache);

struct FieldOutput {
  double sigma = 0.0;
  double y = 0.0;
};

/// Single-sample convenience wrapper.
template <typename Scalar>
FieldOutput field_forward(const FieldParams<Scalar>& params, std::span<const double> x_enc,
                          std::span<const double> d_enc, bool train_mode, Rng& rng,
                          FieldCache<Scalar>* cache = nullptr);

template <typename Scalar>
struct FieldInputGrads {
  typename FieldParams<Scalar>::Matrix x_enc;
  typename FieldParams<Scalar>::Matrix d_enc;
};

/// Accumulates (+=) d(sum_m dL/dsigma_m sigma_m + dL/dy_m y_m) into `grad`.
/// Throws ContractError if the cache is empty or the parameters changed since
/// the forward pass.
template <typename Scalar>
void field_backward(const FieldCache<Scalar>& cache, std::span<const Scalar> d_sigma,
                    std::span<const Scalar> d_y, FieldParams<Scalar>& grad,
                    FieldInputGrads<Scalar>* input_grads = nullptr);

}  // namespace evnerf
