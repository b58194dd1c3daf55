// Copyright 2026 The evnerf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace evnerf {

using Vec3 = Eigen::Vector3d;
using Quat = Eigen::Quaterniond;

/// Pinhole intrinsics in pixels. Camera frame is +x right, +y down, +z forward;
/// pixel (u, v) is sampled through its center (u + 0.5, v + 0.5).
struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  /// Throws ArgumentError unless fx, fy > 0 and the principal point lies on the sensor.
  void validate() const;

  /// Square-pixel camera with the principal point at the image center.
  static CameraIntrinsics centered(int width, int height, double focal);
};

/// Rigid world-from-camera transform. The rotation is renormalized on construction.
class Pose {
 public:
  Pose() = default;
  Pose(const Quat& rotation, const Vec3& translation);

  const Quat& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }

  Vec3 camera_to_world(const Vec3& p_cam) const { return rotation_ * p_cam + translation_; }
  Vec3 world_to_camera(const Vec3& p_world) const {
    return rotation_.conjugate() * (p_world - translation_);
  }

  /// Camera at `eye` looking at `target`, with `up` projected to image-up (-y).
  static Pose look_at(const Vec3& eye, const Vec3& target, const Vec3& up = Vec3::UnitZ());

 private:
  Quat rotation_ = Quat::Identity();
  Vec3 translation_ = Vec3::Zero();
};

struct StampedPose {
  double t = 0.0;
  Pose pose;
};

struct DepthRange {
  double near = 0.1;
  double far = 10.0;

  bool operator==(const DepthRange&) const = default;
};

struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();
  double near = 0.1;
  double far = 10.0;

  Vec3 at(double s) const { return origin + s * direction; }
};

/// Ray through the center of pixel (u, v). Fractional coordinates are allowed;
/// throws RangeError when (u, v) is outside [0, width) x [0, height).
Ray ray_for_pixel(const CameraIntrinsics& intr, const Pose& pose, double u, double v,
                  DepthRange range = {});

/// Inverse of ray_for_pixel: the (u, v) whose ray passes through `p_world`.
Eigen::Vector2d project(const CameraIntrinsics& intr, const Pose& pose, const Vec3& p_world);

/// n cameras evenly spaced in azimuth over [0, 2pi) on a circle of `radius`
/// around `center` at `elevation_deg` above the xy-plane, all looking at center.
std::vector<Pose> orbit_trajectory(const Vec3& center, double radius, double elevation_deg,
                                   int n);

/// One camera of such an orbit at an arbitrary azimuth (radians, from +x).
Pose orbit_pose(const Vec3& center, double radius, double elevation_deg, double azimuth_rad);

/// Linear translation, shortest-arc slerp rotation. t = 0 and t = 1 return the
/// endpoints exactly.
Pose interpolate_pose(const Pose& a, const Pose& b, double t);

/// Pose at time `t` along a stamped trajectory (clamped to its ends).
Pose pose_at_time(const std::vector<StampedPose>& trajectory, double t);

}  // namespace evnerf
