// Copyright 2026 The evnerf Authors
// SPDX-License-Identifier: Apache-2.0

#include "evnerf/scene.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "evnerf/errors.h"
#include "evnerf/renderer.h"

namespace evnerf {
namespace {

double blend_log(double a, double b, double m) {
  return std::exp((1.0 - m) * std::log(a) + m * std::log(b));
}

// 0 or 1 for a hard checker; smooth in between when softness > 0.
double checker_mix(double u, double v, double softness) {
  const double s = std::sin(std::numbers::pi * u) * std::sin(std::numbers::pi * v);
  if (softness <= 0.0) return s > 0.0 ? 1.0 : 0.0;
  return 0.5 + 0.5 * std::tanh(s / softness);
}

}  // namespace

Texture Texture::constant(double value) {
  Texture t;
  t.kind = Kind::kConstant;
  t.a = t.b = value;
  return t;
}

double Texture::eval(const Vec3& x) const {
  switch (kind) {
    case Kind::kConstant:
      return a;
    case Kind::kChecker: {
      const Vec3 p = x - origin;
      double u, v;
      if (spherical) {
        const double r = p.norm();
        const double polar = r > 0.0 ? std::acos(std::clamp(p.z() / r, -1.0, 1.0)) : 0.0;
        const double azimuth = std::atan2(p.y(), p.x());
        u = polar * cell / std::numbers::pi;
        v = azimuth * cell / std::numbers::pi;
      } else {
        u = p.x() / cell;
        v = p.y() / cell;
      }
      return blend_log(a, b, checker_mix(u, v, softness));
    }
    case Kind::kRadial: {
      const double m = std::clamp((x - origin).norm() / radius, 0.0, 1.0);
      return blend_log(a, b, m);
    }
  }
  return a;
}

bool Primitive::contains(const Vec3& x) const {
  switch (shape) {
    case Shape::kSphere:
      return (x - center).squaredNorm() <= radius * radius;
    case Shape::kBox:
      return ((x - center).cwiseAbs().array() <= half_extent.array()).all();
    case Shape::kPlaneSlab:
      return x[axis] >= lo && x[axis] <= hi;
  }
  return false;
}

AnalyticScene::Sample AnalyticScene::eval(const Vec3& x) const {
  Sample out;
  double weighted = 0.0;
  for (const Primitive& p : primitives) {
    if (p.density <= 0.0 || !p.contains(x)) continue;
    out.sigma += p.density;
    weighted += p.density * p.texture.eval(x);
  }
  if (out.sigma > 0.0) out.y = weighted / out.sigma;
  return out;
}

void AnalyticScene::validate() const {
  if (background < 0.0) throw ArgumentError("background luminance must be non-negative");
  if (!(range.near > 0.0 && range.near < range.far)) throw ArgumentError("scene needs 0 < near < far");
  if (!(bounds_half_extent > 0.0)) throw ArgumentError("scene bounds must be positive");
  for (const Primitive& p : primitives) {
    if (p.density < 0.0) throw ArgumentError("primitive density must be non-negative");
    if (p.texture.a < 0.0 || p.texture.b < 0.0) {
      throw ArgumentError("primitive luminance must be non-negative");
    }
    if (p.texture.kind != Texture::Kind::kConstant && (p.texture.a <= 0.0 || p.texture.b <= 0.0)) {
      throw ArgumentError("blended textures need strictly positive levels");
    }
  }
}

GtFrame gt_render(const AnalyticScene& scene, const CameraIntrinsics& intr, const Pose& pose,
                  int n_steps) {
  if (n_steps < 64) throw ArgumentError("gt_render needs n_steps >= 64");
  intr.validate();
  GtFrame frame;
  frame.intensity = Image(intr.width, intr.height);
  frame.depth = Image(intr.width, intr.height);
  frame.depth_norm = Image(intr.width, intr.height);
  frame.opacity = Image(intr.width, intr.height);
  frame.pose = pose;

  const double width = (scene.range.far - scene.range.near) / n_steps;
  std::vector<double> s(n_steps);
  for (int i = 0; i < n_steps; ++i) s[i] = scene.range.near + (i + 0.5) * width;
  std::vector<double> sigma(n_steps), lum(n_steps);

  for (int v = 0; v < intr.height; ++v) {
    for (int u = 0; u < intr.width; ++u) {
      const Ray ray = ray_for_pixel(intr, pose, u, v, scene.range);
      // Midpoint rule: every sample, including the last, owns one full bin.
      const RaySamples samples = make_samples(ray, s, width);
      for (int i = 0; i < n_steps; ++i) {
        const auto e = scene.eval(samples.x[i]);
        sigma[i] = e.sigma;
        lum[i] = e.y;
      }
      const RenderResult r = composite(sigma, lum, samples);
      frame.intensity(u, v) = r.intensity + (1.0 - r.opacity) * scene.background;
      frame.depth(u, v) = r.depth;
      frame.depth_norm(u, v) = r.depth_norm;
      frame.opacity(u, v) = r.opacity;
    }
  }
  return frame;
}

AnalyticScene builtin_scene(std::string_view name) {
  AnalyticScene scene;
  scene.name = std::string(name);
  if (name == "slab") {
    Primitive box;
    box.shape = Primitive::Shape::kBox;
    box.center = Vec3::Zero();
    box.half_extent = Vec3(1.5, 1.5, 0.5);
    box.density = 2.0;
    box.texture = Texture::constant(1.0);
    scene.primitives.push_back(box);
    scene.background = 0.0;
    scene.range = {1.0, 7.0};
    scene.bounds_half_extent = 4.0;
  } else if (name == "sphere_plane" || name == "hdr_boxes") {
    Primitive ground;
    ground.shape = Primitive::Shape::kPlaneSlab;
    ground.axis = 2;
    ground.lo = -1.5;
    ground.hi = -1.0;
    ground.density = 40.0;
    ground.texture.kind = Texture::Kind::kChecker;
    ground.texture.cell = 1.25;
    ground.texture.softness = 0.35;
    scene.range = {1.0, 11.0};
    scene.bounds_half_extent = 12.0;
    scene.background = 1.0;

    if (name == "sphere_plane") {
      ground.texture.a = 0.25;
      ground.texture.b = 0.8;
      scene.primitives.push_back(ground);
      Primitive ball;
      ball.shape = Primitive::Shape::kSphere;
      ball.center = Vec3::Zero();
      ball.radius = 1.0;
      ball.density = 40.0;
      ball.texture.kind = Texture::Kind::kChecker;
      ball.texture.spherical = true;
      ball.texture.origin = ball.center;
      ball.texture.cell = 3.0;
      ball.texture.softness = 0.3;
      ball.texture.a = 0.15;
      ball.texture.b = 1.0;
      scene.primitives.push_back(ball);
    } else {
      ground.texture.a = 0.5;
      ground.texture.b = 2.0;
      scene.primitives.push_back(ground);
      // One luminance decade per box, 1e-2 .. 1e2 overall.
      const double levels[4][2] = {{0.01, 0.1}, {0.1, 1.0}, {1.0, 10.0}, {10.0, 100.0}};
      const Vec3 spots[4] = {Vec3(0.9, 0.9, 0), Vec3(-0.9, 0.9, 0), Vec3(-0.9, -0.9, 0),
                             Vec3(0.9, -0.9, 0)};
      for (int k = 0; k < 4; ++k) {
        Primitive box;
        box.shape = Primitive::Shape::kBox;
        box.half_extent = Vec3(0.5, 0.5, 0.5);
        box.center = spots[k] + Vec3(0, 0, -0.5);
        box.density = 40.0;
        box.texture.kind = Texture::Kind::kChecker;
        box.texture.spherical = true;
        box.texture.origin = box.center;
        box.texture.cell = 2.0;
        box.texture.softness = 0.3;
        box.texture.a = levels[k][0];
        box.texture.b = levels[k][1];
        scene.primitives.push_back(box);
      }
    }
  } else {
    throw ArgumentError("unknown scene '" + std::string(name) +
                        "' (expected slab, sphere_plane or hdr_boxes)");
  }
  scene.validate();
  return scene;
}

OrbitSetup default_orbit(std::string_view scene_name) {
  if (scene_name == "slab") return {Vec3::Zero(), 4.0, 30.0};
  return {Vec3::Zero(), 4.0, 45.0};
}

}  // namespace evnerf
