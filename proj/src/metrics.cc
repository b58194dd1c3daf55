// Copyright 2026 The evnerf Authors
// SPDX-License-Identifier: Apache-2.0

#include "evnerf/metrics.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

#include "evnerf/errors.h"
#include "evnerf/event_loss.h"

namespace evnerf {

Alignment align_log_affine(const Image& pred, const Image& gt, const Mask& mask) {
  if (!pred.same_shape(gt) || !mask.same_shape(gt)) {
    throw ArgumentError("alignment inputs differ in size");
  }
  double n = 0.0, sx = 0.0, st = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!mask[i] || !(gt[i] > 0.0)) continue;
    n += 1.0;
    sx += std::log(pred[i] + kIntensityFloor);
    st += std::log(gt[i] + kIntensityFloor);
  }
  if (n < 2.0) throw EvalError("alignment needs at least 2 masked pixels with gt > 0");
  const double mx = sx / n;
  const double mt = st / n;
  double sxx = 0.0, sxt = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!mask[i] || !(gt[i] > 0.0)) continue;
    const double dx = std::log(pred[i] + kIntensityFloor) - mx;
    const double dt = std::log(gt[i] + kIntensityFloor) - mt;
    sxx += dx * dx;
    sxt += dx * dt;
  }
  Alignment al;
  if (sxx <= 1e-12 * n * std::max(1.0, mx * mx)) {
    al.a = 0.0;
    al.b = mt;
    al.degenerate = true;
    return al;
  }
  al.a = sxt / sxx;
  al.b = mt - al.a * mx;
  return al;
}

Image apply_alignment(const Image& pred, const Alignment& al) {
  Image out(pred.width(), pred.height());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    out[i] = std::max(0.0, std::exp(al.a * std::log(pred[i] + kIntensityFloor) + al.b) -
                               kIntensityFloor);
  }
  return out;
}

namespace {

constexpr int kWindow = 11;

std::array<double, kWindow> gaussian_taps() {
  std::array<double, kWindow> g{};
  double sum = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    g[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
    sum += g[i];
  }
  for (double& x : g) x /= sum;
  return g;
}

}  // namespace

double value_range(const Image& image) {
  if (image.empty()) return 1.0;
  const auto [lo, hi] = std::minmax_element(image.values().begin(), image.values().end());
  return *hi > *lo ? *hi - *lo : 1.0;
}

double ssim(const Image& x, const Image& y, double data_range) {
  if (!x.same_shape(y)) throw ArgumentError("ssim: image sizes differ");
  if (x.width() < kWindow || x.height() < kWindow) {
    throw ArgumentError("ssim: images must be at least 11x11");
  }
  if (!(data_range > 0.0)) throw ArgumentError("ssim: data range must be positive");
  const double c1 = (0.01 * data_range) * (0.01 * data_range);
  const double c2 = (0.03 * data_range) * (0.03 * data_range);
  const auto g = gaussian_taps();
  const int nu = x.width() - kWindow + 1;
  const int nv = x.height() - kWindow + 1;
  double total = 0.0;
  for (int v0 = 0; v0 < nv; ++v0) {
    for (int u0 = 0; u0 < nu; ++u0) {
      double mx = 0, my = 0, xx = 0, yy = 0, xy = 0;
      for (int j = 0; j < kWindow; ++j) {
        for (int i = 0; i < kWindow; ++i) {
          const double w = g[i] * g[j];
          const double a = x(u0 + i, v0 + j);
          const double b = y(u0 + i, v0 + j);
          mx += w * a;
          my += w * b;
          xx += w * a * a;
          yy += w * b * b;
          xy += w * (a * b);
        }
      }
      const double vx = xx - mx * mx;
      const double vy = yy - my * my;
      const double cxy = xy - mx * my;
      total += ((2 * mx * my + c1) * (2 * cxy + c2)) /
               ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
  }
  return total / (static_cast<double>(nu) * nv);
}

double mse(const Image& x, const Image& y) {
  if (!x.same_shape(y)) throw ArgumentError("mse: image sizes differ");
  if (x.empty()) throw EvalError("mse of empty images");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
  return s / static_cast<double>(x.size());
}

DepthMetrics depth_metrics(const Image& pred, const Image& gt, const Mask& mask) {
  if (!pred.same_shape(gt) || !mask.same_shape(gt)) {
    throw ArgumentError("depth inputs differ in size");
  }
  double n = 0.0, abs_rel = 0.0, sq_rel = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!mask[i]) continue;
    if (!(gt[i] > 0.0)) throw EvalError("gt depth must be positive under the mask");
    const double d = pred[i] - gt[i];
    n += 1.0;
    abs_rel += std::abs(d) / gt[i];
    sq_rel += d * d / gt[i];
    sq += d * d;
  }
  if (n == 0.0) throw EvalError("depth mask is empty");
  return {abs_rel / n, sq_rel / n, std::sqrt(sq / n)};
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ArgumentError("pearson: sample counts differ");
  if (x.size() < 2) throw EvalError("pearson needs at least 2 samples");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) throw EvalError("pearson: zero variance");
  return sxy / std::sqrt(sxx * syy);
}

Mask threshold_mask(const Image& image, double threshold) {
  Mask m(image.width(), image.height(), 0);
  for (std::size_t i = 0; i < image.size(); ++i) m[i] = image[i] > threshold ? 1 : 0;
  return m;
}

EvalReport evaluate_view(const Image& pred_intensity, const Image& pred_depth_norm,
                         const Image& gt_intensity, const Image& gt_depth_norm,
                         const Image& gt_opacity) {
  EvalReport r;
  const Mask all(gt_intensity.width(), gt_intensity.height(), 1);
  r.alignment = align_log_affine(pred_intensity, gt_intensity, all);
  const Image aligned = apply_alignment(pred_intensity, r.alignment);
  const double range = value_range(gt_intensity);
  r.ssim = ssim(aligned, gt_intensity, range);
  r.mse = mse(aligned, gt_intensity) / (range * range);

  const Mask depth_mask = threshold_mask(gt_opacity, 0.5);
  std::size_t on = 0;
  for (unsigned char m : depth_mask.values()) on += m;
  r.mask_fraction = static_cast<double>(on) / static_cast<double>(depth_mask.size());
  if (on == 0) {
    r.abs_rel = r.sq_rel = r.rmse = std::numeric_limits<double>::quiet_NaN();
  } else {
    const DepthMetrics d = depth_metrics(pred_depth_norm, gt_depth_norm, depth_mask);
    r.abs_rel = d.abs_rel;
    r.sq_rel = d.sq_rel;
    r.rmse = d.rmse;
  }
  return r;
}

EvalReport average(std::span<const EvalReport> reports) {
  if (reports.empty()) throw EvalError("no reports to average");
  EvalReport out;
  out.mse = out.ssim = out.abs_rel = out.sq_rel = out.rmse = 0.0;
  out.alignment = {0.0, 0.0, false};
  out.mask_fraction = 0.0;
  out.views = 0;
  for (const EvalReport& r : reports) {
    out.mse += r.mse;
    out.ssim += r.ssim;
    out.abs_rel += r.abs_rel;
    out.sq_rel += r.sq_rel;
    out.rmse += r.rmse;
    out.alignment.a += r.alignment.a;
    out.alignment.b += r.alignment.b;
    out.alignment.degenerate = out.alignment.degenerate || r.alignment.degenerate;
    out.mask_fraction += r.mask_fraction;
    out.views += r.views;
  }
  const double n = static_cast<double>(reports.size());
  out.mse /= n;
  out.ssim /= n;
  out.abs_rel /= n;
  out.sq_rel /= n;
  out.rmse /= n;
  out.alignment.a /= n;
  out.alignment.b /= n;
  out.mask_fraction /= n;
  return out;
}

std::string report_csv_header() {
  return "set,views,mse,ssim,abs_rel,sq_rel,rmse,align_a,align_b,degenerate,mask_fraction";
}

std::string report_csv_row(const std::string& label, const EvalReport& r) {
  std::ostringstream os;
  os.precision(9);
  os << label << ',' << r.views << ',' << r.mse << ',' << r.ssim << ',' << r.abs_rel << ','
     << r.sq_rel << ',' << r.rmse << ',' << r.alignment.a << ',' << r.alignment.b << ','
     << (r.alignment.degenerate ? 1 : 0) << ',' << r.mask_fraction;
  return os.str();
}

std::string report_summary(const std::string& label, const EvalReport& r) {
  std::ostringstream os;
  os.precision(4);
  os << label << " (" << r.views << " views): SSIM " << r.ssim << ", MSE " << r.mse
     << ", depth Abs Rel " << r.abs_rel << ", Sq Rel " << r.sq_rel << ", RMSE " << r.rmse
     << ", mask " << r.mask_fraction << ", alignment a=" << r.alignment.a
     << " b=" << r.alignment.b << (r.alignment.degenerate ? " (degenerate)" : "");
  return os.str();
}

}  // namespace evnerf
