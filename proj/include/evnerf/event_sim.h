// Copyright 2026 The evnerf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "evnerf/image.h"

namespace evnerf {

struct Event {
  double t = 0.0;
  int u = 0;
  int v = 0;
  int polarity = 1;  // +1 or -1

  bool operator==(const Event&) const = default;
};

/// Strict weak order used for every stream: time, then row, column, polarity.
bool event_before(const Event& a, const Event& b);

struct EventStream {
  std::vector<Event> events;
  int width = 0;
  int height = 0;
  double t_start = 0.0;
  double t_end = 0.0;

  /// Throws DataError on out-of-range pixels or times, bad polarity, or bad order.
  void validate() const;
};

struct NoiseConfig {
  double ratio = 0.0;                   // spurious events per signal event
  double threshold_jitter_sigma = 0.0;  // per-pixel threshold std, log units
  std::uint64_t seed = 0;
};

/// Smallest threshold magnitude a pixel can end up with after jitter.
inline constexpr double kMinThresholdMagnitude = 0.05;

struct PixelThresholds {
  Image positive;  // >= kMinThresholdMagnitude
  Image negative;  // <= -kMinThresholdMagnitude
};

/// Per-pixel thresholds: B+ + N(0, s^2) and B- - |N(0, s^2)|, drawn once per
/// pixel (row-major) from `jitter.seed`, then clamped away from zero.
PixelThresholds pixel_thresholds(int width, int height, double b_plus, double b_minus,
                                 const NoiseConfig& jitter);

struct LogFrame {
  double t = 0.0;
  Image log_intensity;
};

/// Contrast-threshold simulation. Each pixel keeps a reference level starting
/// at the first frame; every crossing of the reference by a threshold emits an
/// event and moves the reference by that threshold. Event times are linear in
/// log intensity between the two bracketing frames.
EventStream simulate_events(std::span<const LogFrame> frames, double b_plus, double b_minus,
                            const NoiseConfig& jitter);

/// Adds floor(ratio * n) uniformly placed events with random polarity.
EventStream inject_noise(const EventStream& stream, double ratio, std::uint64_t seed);

struct EventCountGrid {
  CountGrid n_pos;
  CountGrid n_neg;
  int index = 0;
  double t_begin = 0.0;
  double t_end = 0.0;
};

/// Per-interval event counts for [T_j, T_{j+1}).
std::vector<EventCountGrid> count_events(const EventStream& stream,
                                         std::span<const double> interval_times);

/// Events with t in [t0, t1), as a stream over that window.
EventStream slice_events(const EventStream& stream, double t0, double t1);

}  // namespace evnerf
