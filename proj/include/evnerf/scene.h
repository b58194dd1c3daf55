// Copyright 2026 The evnerf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "evnerf/geometry.h"
#include "evnerf/image.h"

namespace evnerf {

/// Procedural luminance pattern. Values are linear intensities; patterns that
/// mix two levels blend them geometrically so HDR ranges stay well behaved.
struct Texture {
  enum class Kind { kConstant, kChecker, kRadial };
  Kind kind = Kind::kConstant;
  double a = 1.0;       // constant value, or first checker level / radial center value
  double b = 1.0;       // second checker level / radial rim value
  double cell = 1.0;    // checker cell size (planar) or cells per pi radians (spherical)
  double softness = 0;  // 0 = hard checker edges; larger = smoother transitions
  double radius = 1.0;  // radial falloff distance
  Vec3 origin = Vec3::Zero();
  bool spherical = false;  // checker in (polar, azimuth) around `origin`

  double eval(const Vec3& x) const;
  static Texture constant(double value);
};

struct Primitive {
  enum class Shape { kSphere, kBox, kPlaneSlab };
  Shape shape = Shape::kSphere;
  Vec3 center = Vec3::Zero();
  double radius = 1.0;                // sphere
  Vec3 half_extent = Vec3::Ones();    // box
  int axis = 2;                       // plane slab: normal axis
  double lo = -1.0, hi = 0.0;         // plane slab: extent along `axis` (unbounded elsewhere)
  double density = 1.0;
  Texture texture;

  bool contains(const Vec3& x) const;
};

/// Density and luminance fields built from primitives. Overlapping primitives
/// add densities; luminance is the density-weighted mean.
struct AnalyticScene {
  std::string name;
  std::vector<Primitive> primitives;
  double background = 0.0;  // luminance seen through residual transmittance
  DepthRange range;         // sampling bounds for every ray
  Vec3 bounds_center = Vec3::Zero();
  double bounds_half_extent = 1.0;  // positions are normalized by this before encoding

  struct Sample {
    double sigma = 0.0;
    double y = 0.0;
  };
  Sample eval(const Vec3& x) const;

  /// Throws ArgumentError when a density or luminance is negative.
  void validate() const;
};

struct GtFrame {
  Image intensity;   // composited luminance blended with the background
  Image depth;       // raw sum_i w_i s_i
  Image depth_norm;  // depth / opacity
  Image opacity;
  double timestamp = 0.0;
  Pose pose;
};

/// Deterministic dense ray march: n_steps midpoints of equal sub-intervals of
/// [near, far], composited with the same routine the learned model uses.
GtFrame gt_render(const AnalyticScene& scene, const CameraIntrinsics& intr, const Pose& pose,
                  int n_steps);

/// "slab", "sphere_plane" or "hdr_boxes".
AnalyticScene builtin_scene(std::string_view name);

/// Camera placement that frames a builtin scene.
struct OrbitSetup {
  Vec3 center = Vec3::Zero();
  double radius = 4.0;
  double elevation_deg = 30.0;
};
OrbitSetup default_orbit(std::string_view scene_name);

}  // namespace evnerf
