// Copyright 2026 The evnerf Authors
// SPDX-License-Identifier: Apache-2.0

#include "evnerf/geometry.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "evnerf/errors.h"

namespace evnerf {

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw ArgumentError("focal lengths must be positive");
  if (width <= 0 || height <= 0) throw ArgumentError("sensor size must be positive");
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
    throw ArgumentError("principal point must lie on the sensor");
  }
}

CameraIntrinsics CameraIntrinsics::centered(int width, int height, double focal) {
  CameraIntrinsics intr{focal, focal, 0.5 * width, 0.5 * height, width, height};
  intr.validate();
  return intr;
}

Pose::Pose(const Quat& rotation, const Vec3& translation)
    : rotation_(rotation), translation_(translation) {
  const double n2 = rotation_.squaredNorm();
  if (!(n2 > 0.0) || !std::isfinite(n2)) throw ArgumentError("pose rotation must be non-zero");
  // Leave already-unit quaternions untouched so text round trips are exact.
  if (std::abs(n2 - 1.0) > 4.0 * std::numeric_limits<double>::epsilon()) rotation_.normalize();
}

Pose Pose::look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
  const Vec3 forward = (target - eye).normalized();
  Vec3 right = forward.cross(up);
  if (right.norm() < 1e-12) throw ArgumentError("look_at: up vector parallel to view direction");
  right.normalize();
  const Vec3 down = forward.cross(right);
  Eigen::Matrix3d r;
  r.col(0) = right;
  r.col(1) = down;
  r.col(2) = forward;
  return Pose(Quat(r), eye);
}

Ray ray_for_pixel(const CameraIntrinsics& intr, const Pose& pose, double u, double v,
                  DepthRange range) {
  if (!(u >= 0.0 && u < intr.width) || !(v >= 0.0 && v < intr.height)) {
    throw RangeError("pixel (" + std::to_string(u) + ", " + std::to_string(v) +
                     ") outside sensor");
  }
  if (!(range.near > 0.0 && range.near < range.far)) {
    throw ArgumentError("ray bounds must satisfy 0 < near < far");
  }
  const Vec3 cam((u + 0.5 - intr.cx) / intr.fx, (v + 0.5 - intr.cy) / intr.fy, 1.0);
  Ray ray;
  ray.origin = pose.translation();
  ray.direction = (pose.rotation() * cam).normalized();
  ray.near = range.near;
  ray.far = range.far;
  return ray;
}

Eigen::Vector2d project(const CameraIntrinsics& intr, const Pose& pose, const Vec3& p_world) {
  const Vec3 c = pose.world_to_camera(p_world);
  return {intr.fx * c.x() / c.z() + intr.cx - 0.5, intr.fy * c.y() / c.z() + intr.cy - 0.5};
}

std::vector<Pose> orbit_trajectory(const Vec3& center, double radius, double elevation_deg,
                                   int n) {
  if (n < 2) throw ArgumentError("orbit needs at least 2 poses");
  if (!(radius > 0.0)) throw ArgumentError("orbit radius must be positive");
  if (!(std::abs(elevation_deg) < 90.0)) throw ArgumentError("orbit elevation must be in (-90, 90)");
  std::vector<Pose> poses;
  poses.reserve(n);
  for (int i = 0; i < n; ++i) {
    poses.push_back(orbit_pose(center, radius, elevation_deg, 2.0 * std::numbers::pi * i / n));
  }
  return poses;
}

Pose orbit_pose(const Vec3& center, double radius, double elevation_deg, double azimuth_rad) {
  const double el = elevation_deg * std::numbers::pi / 180.0;
  const Vec3 offset(std::cos(el) * std::cos(azimuth_rad), std::cos(el) * std::sin(azimuth_rad),
                    std::sin(el));
  return Pose::look_at(center + radius * offset, center);
}

Pose interpolate_pose(const Pose& a, const Pose& b, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw RangeError("interpolation parameter outside [0, 1]");
  if (t == 0.0) return a;
  if (t == 1.0) return b;
  const Vec3 translation = (1.0 - t) * a.translation() + t * b.translation();
  // Eigen's slerp already picks the shorter arc.
  return Pose(a.rotation().slerp(t, b.rotation()), translation);
}

Pose pose_at_time(const std::vector<StampedPose>& trajectory, double t) {
  if (trajectory.empty()) throw ArgumentError("empty trajectory");
  if (t <= trajectory.front().t) return trajectory.front().pose;
  if (t >= trajectory.back().t) return trajectory.back().pose;
  auto it = std::upper_bound(trajectory.begin(), trajectory.end(), t,
                             [](double x, const StampedPose& p) { return x < p.t; });
  const StampedPose& hi = *it;
  const StampedPose& lo = *(it - 1);
  const double span = hi.t - lo.t;
  const double f = span > 0.0 ? std::clamp((t - lo.t) / span, 0.0, 1.0) : 0.0;
  return interpolate_pose(lo.pose, hi.pose, f);
}

}  // namespace evnerf
