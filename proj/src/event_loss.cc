// Copyright 2026 The evnerf Authors
// SPDX-License-Identifier: Apache-2.0

#include "evnerf/event_loss.h"

#include <cmath>
#include <numeric>
#include <string>

#include "evnerf/errors.h"

namespace evnerf {

ThresholdSet::ThresholdSet(int intervals, double b_plus, double b_minus)
    : intervals_(intervals), raw_(2 * static_cast<std::size_t>(intervals)) {
  if (intervals < 0) throw ArgumentError("threshold set needs a non-negative interval count");
  for (int j = 0; j < intervals; ++j) set(j, b_plus, b_minus);
}

void ThresholdSet::check(int j) const {
  if (j < 0 || j >= intervals_) {
    throw ConfigError("no thresholds registered for interval " + std::to_string(j));
  }
}

double ThresholdSet::plus(int j) const {
  check(j);
  return std::exp(raw_[j]);
}

double ThresholdSet::minus(int j) const {
  check(j);
  return -std::exp(raw_[intervals_ + j]);
}

void ThresholdSet::set(int j, double b_plus, double b_minus) {
  check(j);
  if (!(b_plus > 0.0) || !(b_minus < 0.0)) throw ArgumentError("thresholds need B+ > 0 > B-");
  raw_[j] = std::log(b_plus);
  raw_[intervals_ + j] = std::log(-b_minus);
}

double ThresholdSet::mean_plus() const {
  double s = 0.0;
  for (int j = 0; j < intervals_; ++j) s += plus(j);
  return intervals_ > 0 ? s / intervals_ : 0.0;
}

double ThresholdSet::mean_minus() const {
  double s = 0.0;
  for (int j = 0; j < intervals_; ++j) s += minus(j);
  return intervals_ > 0 ? s / intervals_ : 0.0;
}

LogDiff delta_log(double i0, double i1) {
  const double a = i0 + kIntensityFloor;
  const double b = i1 + kIntensityFloor;
  return {std::log(b) - std::log(a), -1.0 / a, 1.0 / b};
}

double event_sum(int n_pos, int n_neg, const IntervalThresholds& thr) {
  return n_pos * thr.b_plus + n_neg * thr.b_minus;
}

DeadZone dead_zone(double x, const IntervalThresholds& thr) {
  if (x > thr.b_plus) return {x - thr.b_plus, 1.0, -1.0, 0.0};
  if (x < thr.b_minus) return {-x + thr.b_minus, -1.0, 0.0, 1.0};
  return {};
}

EventLossResult event_render_loss(std::span<const RayTerm> batch, const ThresholdSet& thresholds) {
  EventLossResult r;
  const std::size_t n = batch.size();
  r.d_i0.assign(n, 0.0);
  r.d_i1.assign(n, 0.0);
  r.residual.assign(n, 0.0);
  r.d_raw.assign(thresholds.raw().size(), 0.0);
  if (n == 0) return r;
  const double scale = 1.0 / static_cast<double>(n);
  const int intervals = thresholds.intervals();
  for (std::size_t k = 0; k < n; ++k) {
    const RayTerm& t = batch[k];
    const IntervalThresholds thr = thresholds.at(t.interval);
    const LogDiff dl = delta_log(t.i0, t.i1);
    const double x = dl.value - event_sum(t.n_pos, t.n_neg, thr);
    const DeadZone dz = dead_zone(x, thr);
    r.residual[k] = dz.f;
    if (dz.f == 0.0) continue;
    r.loss += scale * dz.f * dz.f;
    const double g = 2.0 * dz.f * scale;
    const double g_x = g * dz.df_dx;
    r.d_i0[k] = g_x * dl.d_i0;
    r.d_i1[k] = g_x * dl.d_i1;
    const double d_plus = -g_x * t.n_pos + g * dz.df_dplus;
    const double d_minus = -g_x * t.n_neg + g * dz.df_dminus;
    // B+ = exp(p) and B- = -exp(m): dB/draw equals B in both cases.
    r.d_raw[t.interval] += d_plus * thr.b_plus;
    r.d_raw[intervals + t.interval] += d_minus * thr.b_minus;
  }
  return r;
}

BoundLossResult threshold_bound_loss(const ThresholdSet& thresholds, double b0_plus,
                                     double b0_minus) {
  BoundLossResult r;
  const int intervals = thresholds.intervals();
  r.d_raw.assign(thresholds.raw().size(), 0.0);
  for (int j = 0; j < intervals; ++j) {
    const double bp = thresholds.plus(j);
    const double bm = thresholds.minus(j);
    if (b0_plus - bp > 0.0) {
      r.loss += b0_plus - bp;
      r.d_raw[j] = -bp;
    }
    if (bm - b0_minus > 0.0) {
      r.loss += bm - b0_minus;
      r.d_raw[intervals + j] = bm;
    }
  }
  return r;
}

LossBreakdown combine_losses(const EventLossResult& event, const BoundLossResult& bound,
                             double lambda) {
  LossBreakdown out;
  out.event_loss = event.loss;
  out.thres_loss = bound.loss;
  out.total = event.loss + lambda * bound.loss;
  out.residuals = event.residual;
  return out;
}

}  // namespace evnerf
