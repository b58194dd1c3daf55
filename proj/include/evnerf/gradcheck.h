// Copyright 2026 The evnerf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace evnerf {

struct GradcheckOptions {
  double step = 1e-5;       // central-difference step
  double tolerance = 1e-5;  // max relative error
  /// Relative errors are |a - n| / max(|a|, |n|, floor): gradients smaller
  /// than this are compared in absolute terms.
  double floor = 1e-5;
  int probes_per_block = 8;  // default-architecture suite
  std::uint64_t seed = 7;
};

struct GradcheckResult {
  std::string suite;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // probes too close to a kink to difference
  double max_rel_error = 0.0;
  std::string worst;  // parameter with the largest error
  bool passed = false;
};

/// Finite differences in 64-bit (one-sided next to ReLU and dead-zone kinks)
/// against the analytic gradients:
///   composite      every sigma and y of a random 32-sample ray
///   event_loss     every threshold parameter and intensity of a random batch
///   field_2x32     every parameter and threshold, end-to-end loss, 2x32 net
///   field_default  up to probes_per_block entries of every block, 8x256 net
std::vector<GradcheckResult> run_gradcheck(const GradcheckOptions& opts = {});

}  // namespace evnerf
