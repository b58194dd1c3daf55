// Copyright 2026 The evnerf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>

#include "evnerf/image.h"

namespace evnerf {

using Mask = Grid<unsigned char>;

struct Alignment {
  double a = 1.0;
  double b = 0.0;
  bool degenerate = false;  // constant prediction: a = 0, b = mean log gt
};

/// Least-squares fit of a*log(pred + eps) + b to log(gt + eps) over masked
/// pixels with gt > 0. Throws EvalError with fewer than 2 usable pixels.
Alignment align_log_affine(const Image& pred, const Image& gt, const Mask& mask);

/// exp(a*log(pred + eps) + b) - eps, clamped at 0.
Image apply_alignment(const Image& pred, const Alignment& al);

/// Mean local SSIM over valid 11x11 Gaussian windows (sigma 1.5, K1 0.01,
/// K2 0.03) for images whose values span `data_range`. Symmetric in x, y up
/// to rounding.
double ssim(const Image& x, const Image& y, double data_range = 1.0);

/// max - min of the image, or 1 for a constant image.
double value_range(const Image& image);

double mse(const Image& x, const Image& y);

struct DepthMetrics {
  double abs_rel = 0.0;
  double sq_rel = 0.0;
  double rmse = 0.0;
};

/// Throws EvalError on an empty mask or non-positive gt depth under the mask.
DepthMetrics depth_metrics(const Image& pred, const Image& gt, const Mask& mask);

/// Pearson correlation of paired samples. Throws EvalError when either side
/// has zero variance or fewer than 2 samples.
double pearson(std::span<const double> x, std::span<const double> y);

/// Pixels where `image` > threshold.
Mask threshold_mask(const Image& image, double threshold);

struct EvalReport {
  double mse = 0.0;
  double ssim = 0.0;
  double abs_rel = 0.0;
  double sq_rel = 0.0;
  double rmse = 0.0;
  Alignment alignment;
  double mask_fraction = 0.0;
  int views = 1;
};

/// Intensity metrics on the aligned prediction, with both images scaled by
/// the gt range (so MSE is in units of that range), plus depth metrics on
/// depth_norm under gt opacity > 0.5. Depth metrics are NaN when that mask
/// is empty.
EvalReport evaluate_view(const Image& pred_intensity, const Image& pred_depth_norm,
                         const Image& gt_intensity, const Image& gt_depth_norm,
                         const Image& gt_opacity);

/// Arithmetic mean of every field (alignment coefficients included).
EvalReport average(std::span<const EvalReport> reports);

std::string report_csv_header();
std::string report_csv_row(const std::string& label, const EvalReport& r);
std::string report_summary(const std::string& label, const EvalReport& r);

}  // namespace evnerf
