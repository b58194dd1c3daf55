// Copyright 2026 The evnerf Authors
// SPDX-License-Identifier: Apache-2.0

#include "evnerf/adam.h"

#include <cmath>

#include "evnerf/errors.h"

namespace evnerf {

void AdamConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw ConfigError("Adam eps must be positive");
}

template <typename Scalar>
void Adam<Scalar>::step(std::span<Scalar> params, std::span<const Scalar> grad,
                        const AdamConfig& cfg, double learning_rate) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    throw ConfigError("Adam: parameter count differs from optimizer state");
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t_));
  // Folding both corrections into the step size: lr * sqrt(bc2) / bc1.
  const auto alpha = static_cast<Scalar>(learning_rate * std::sqrt(bc2) / bc1);
  const auto eps = static_cast<Scalar>(cfg.eps * std::sqrt(bc2));
  const auto b1 = static_cast<Scalar>(cfg.beta1);
  const auto b2 = static_cast<Scalar>(cfg.beta2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Scalar g = grad[i];
    m_[i] = b1 * m_[i] + (Scalar(1) - b1) * g;
    v_[i] = b2 * v_[i] + (Scalar(1) - b2) * g * g;
    params[i] -= alpha * m_[i] / (std::sqrt(v_[i]) + eps);
  }
}

template class Adam<float>;
template class Adam<double>;

}  // namespace evnerf
