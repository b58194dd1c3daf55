// Copyright 2026 The evnerf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

namespace evnerf {

/// Floor added to rendered intensities before taking logs.
inline constexpr double kIntensityFloor = 1e-5;
/// Default lower bounds on threshold magnitude used by the bound loss.
inline constexpr double kBoundPlus = 0.3;
inline constexpr double kBoundMinus = -0.3;

struct IntervalThresholds {
  double b_plus = 0.5;
  double b_minus = -0.5;
  int index = 0;
};

/// Per-interval contrast thresholds stored as unconstrained log-magnitudes:
/// B+ = exp(p), B- = -exp(m).
class ThresholdSet {
 public:
  ThresholdSet() = default;
  ThresholdSet(int intervals, double b_plus, double b_minus);

  int intervals() const { return intervals_; }
  double plus(int j) const;
  double minus(int j) const;
  IntervalThresholds at(int j) const { return {plus(j), minus(j), j}; }
  void set(int j, double b_plus, double b_minus);

  /// Raw parameters: [log|B+_0|, ..., log|B+_{J-1}|, log|B-_0|, ..., log|B-_{J-1}|].
  std::span<double> raw() { return raw_; }
  std::span<const double> raw() const { return raw_; }

  double mean_plus() const;
  double mean_minus() const;

  bool operator==(const ThresholdSet& o) const { return raw_ == o.raw_; }

 private:
  void check(int j) const;

  int intervals_ = 0;
  std::vector<double> raw_;
};

struct LogDiff {
  double value = 0.0;
  double d_i0 = 0.0;  // d/dI(T_j)
  double d_i1 = 0.0;  // d/dI(T_{j+1})
};

/// log(I1 + floor) - log(I0 + floor) with its partials.
LogDiff delta_log(double i0, double i1);

/// n+ B+ + n- B- (B- < 0, so negative events subtract).
double event_sum(int n_pos, int n_neg, const IntervalThresholds& thr);

struct DeadZone {
  double f = 0.0;
  double df_dx = 0.0;
  double df_dplus = 0.0;
  double df_dminus = 0.0;
};

/// x - B+ above B+, 0 inside [B-, B+], -x + B- below B-. Partials are zero at
/// the kinks.
DeadZone dead_zone(double x, const IntervalThresholds& thr);

/// One ray of the event loss: rendered intensities at both interval ends and
/// the event counts at that pixel.
struct RayTerm {
  int interval = 0;
  double i0 = 0.0;
  double i1 = 0.0;
  int n_pos = 0;
  int n_neg = 0;
};

struct EventLossResult {
  double loss = 0.0;
  std::vector<double> d_i0, d_i1;  // per ray
  std::vector<double> residual;    // dead-zone output f per ray
  std::vector<double> d_raw;       // per threshold parameter (ThresholdSet::raw layout)
};

/// Batch mean of f^2(dL - B_j(r)), with gradients to intensities and the
/// log-magnitude threshold parameters. Throws ConfigError for an interval
/// index with no registered thresholds.
EventLossResult event_render_loss(std::span<const RayTerm> batch, const ThresholdSet& thresholds);

struct BoundLossResult {
  double loss = 0.0;
  std::vector<double> d_raw;
};

/// sum_j relu(B0+ - B+_j) + relu(B-_j - B0-).
BoundLossResult threshold_bound_loss(const ThresholdSet& thresholds, double b0_plus = kBoundPlus,
                                     double b0_minus = kBoundMinus);

struct LossBreakdown {
  double event_loss = 0.0;
  double thres_loss = 0.0;
  double total = 0.0;
  std::vector<double> residuals;
};

LossBreakdown combine_losses(const EventLossResult& event, const BoundLossResult& bound,
                             double lambda);

}  // namespace evnerf
