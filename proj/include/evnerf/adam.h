// Copyright 2026 The evnerf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace evnerf {

struct AdamConfig {
  double learning_rate = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;
};

/// Adam with bias correction. Moments are kept in the parameter type so a
/// float model has float state and checkpoints store it exactly.
template <typename Scalar>
class Adam {
 public:
  Adam() = default;
  explicit Adam(std::size_t n) : m_(n, Scalar(0)), v_(n, Scalar(0)) {}

  /// One update with step count t+1 and the given learning rate.
  void step(std::span<Scalar> params, std::span<const Scalar> grad, const AdamConfig& cfg,
            double learning_rate);
  void step(std::span<Scalar> params, std::span<const Scalar> grad, const AdamConfig& cfg) {
    step(params, grad, cfg, cfg.learning_rate);
  }

  std::uint64_t steps() const { return t_; }
  void set_steps(std::uint64_t t) { t_ = t; }
  std::span<Scalar> first_moment() { return m_; }
  std::span<Scalar> second_moment() { return v_; }
  std::span<const Scalar> first_moment() const { return m_; }
  std::span<const Scalar> second_moment() const { return v_; }
  std::size_t size() const { return m_.size(); }

  bool operator==(const Adam&) const = default;

 private:
  std::vector<Scalar> m_, v_;
  std::uint64_t t_ = 0;
};

}  // namespace evnerf
