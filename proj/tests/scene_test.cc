// Copyright 2026 The evnerf Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "evnerf/errors.h"
#include "evnerf/scene.h"

namespace evnerf {
namespace {

// Homogeneous horizontal layer z in [-extent/2, extent/2], seen from straight above.
AnalyticScene layer_scene(double sigma, double extent, double y0) {
  AnalyticScene scene;
  Primitive p;
  p.shape = Primitive::Shape::kPlaneSlab;
  p.axis = 2;
  p.lo = -extent / 2;
  p.hi = extent / 2;
  p.density = sigma;
  p.texture = Texture::constant(y0);
  scene.primitives.push_back(p);
  scene.range = {1.0, 5.0};
  return scene;
}

// One pixel whose center looks straight down from height h.
struct TopDown {
  CameraIntrinsics intr;
  Pose pose;
};

TopDown top_down(double h) {
  TopDown t;
  t.intr.width = t.intr.height = 1;
  t.intr.cx = t.intr.cy = 0.5;
  t.pose = Pose::look_at(Vec3(0, 0, h), Vec3::Zero(), Vec3::UnitY());
  return t;
}

}  // namespace

TEST_CASE("empty scene shows the background with zero opacity") {
  AnalyticScene scene;
  scene.background = 0.7;
  const GtFrame f = gt_render(scene, CameraIntrinsics::centered(6, 5, 4), Pose(), 64);
  for (std::size_t i = 0; i < f.intensity.size(); ++i) {
    CHECK(f.intensity[i] == doctest::Approx(0.7));
    CHECK(f.opacity[i] == 0.0);
    CHECK(f.depth[i] == 0.0);
  }
  CHECK(f.intensity.width() == 6);
  CHECK(f.intensity.height() == 5);
}

TEST_CASE("homogeneous layer matches the closed-form transmittance integral") {
  const double sigma = 1.3, y0 = 2.0;
  const TopDown cam = top_down(3.0);
  // Faces on bin edges: the midpoint rule is exact for a homogeneous layer.
  const GtFrame f = gt_render(layer_scene(sigma, 1.0, y0), cam.intr, cam.pose, 1024);
  const double expected = y0 * (1.0 - std::exp(-sigma));
  CHECK(std::abs(f.intensity(0, 0) - expected) / expected < 1e-9);
  CHECK(f.opacity(0, 0) == doctest::Approx(1.0 - std::exp(-sigma)).epsilon(1e-9));
  // Faces inside bins: off by at most one bin of optical depth.
  const double step = 4.0 / 1024;
  const GtFrame g = gt_render(layer_scene(sigma, 0.8, y0), cam.intr, cam.pose, 1024);
  const double thin = y0 * (1.0 - std::exp(-sigma * 0.8));
  CHECK(std::abs(g.intensity(0, 0) - thin) / thin < sigma * step);
}

TEST_CASE("opaque sphere depth is the distance to its surface") {
  const AnalyticScene scene = builtin_scene("sphere_plane");
  const int n = 256;
  for (double elev : {20.0, 45.0}) {
    const Pose pose = orbit_trajectory(Vec3::Zero(), 4.0, elev, 3)[1];
    CameraIntrinsics intr;
    intr.width = intr.height = 1;
    intr.cx = intr.cy = 0.5;
    intr.fx = intr.fy = 10;
    const GtFrame f = gt_render(scene, intr, pose, n);
    const double tol = 2.0 / n * (scene.range.far - scene.range.near);
    CHECK(std::abs(f.depth_norm(0, 0) - (4.0 - 1.0)) <= tol);
    CHECK(f.opacity(0, 0) > 0.999);
  }
}

TEST_CASE("builtin scenes") {
  CHECK(builtin_scene("slab").primitives.size() == 1);
  CHECK_THROWS_AS(builtin_scene("teapot"), ArgumentError);

  const AnalyticScene hdr = builtin_scene("hdr_boxes");
  double lo = 1e300, hi = 0;
  for (const Primitive& p : hdr.primitives) {
    lo = std::min({lo, p.texture.a, p.texture.b});
    hi = std::max({hi, p.texture.a, p.texture.b});
  }
  lo = std::min(lo, hdr.background);
  hi = std::max(hi, hdr.background);
  CHECK(hi / lo == doctest::Approx(1e4));
}

TEST_CASE("sphere_plane covers at least 30% of an orbit view") {
  const AnalyticScene scene = builtin_scene("sphere_plane");
  const OrbitSetup orbit = default_orbit("sphere_plane");
  const auto poses = orbit_trajectory(orbit.center, orbit.radius, orbit.elevation_deg, 6);
  for (const Pose& pose : poses) {
    const GtFrame f = gt_render(scene, CameraIntrinsics::centered(64, 64, 80), pose, 64);
    const auto covered = std::count_if(f.opacity.values().begin(), f.opacity.values().end(),
                                       [](double o) { return o > 0.0; });
    CHECK(static_cast<double>(covered) / f.opacity.size() >= 0.3);
  }
}

TEST_CASE("gt_render is deterministic and bounded") {
  const AnalyticScene scene = builtin_scene("sphere_plane");
  const Pose pose = orbit_trajectory(Vec3::Zero(), 4.0, 45.0, 5)[2];
  const CameraIntrinsics intr = CameraIntrinsics::centered(24, 20, 30);
  const GtFrame a = gt_render(scene, intr, pose, 96);
  const GtFrame b = gt_render(scene, intr, pose, 96);
  CHECK(a.intensity == b.intensity);
  CHECK(a.depth == b.depth);
  CHECK(a.opacity == b.opacity);
  for (std::size_t i = 0; i < a.intensity.size(); ++i) {
    CHECK(a.intensity[i] >= 0.0);
    CHECK(a.opacity[i] >= 0.0);
    CHECK(a.opacity[i] <= 1.0 + 1e-12);
  }
}

TEST_CASE("gt_render opacity equals one minus the marched transmittance") {
  const AnalyticScene scene = builtin_scene("hdr_boxes");
  const Pose pose = orbit_trajectory(Vec3::Zero(), 4.0, 45.0, 7)[3];
  const CameraIntrinsics intr = CameraIntrinsics::centered(12, 12, 14);
  const int n = 128;
  const GtFrame f = gt_render(scene, intr, pose, n);
  const double width = (scene.range.far - scene.range.near) / n;
  for (int v = 0; v < intr.height; ++v) {
    for (int u = 0; u < intr.width; ++u) {
      const Ray ray = ray_for_pixel(intr, pose, u, v, scene.range);
      double tau = 0;
      for (int i = 0; i < n; ++i) {
        tau += scene.eval(ray.at(scene.range.near + (i + 0.5) * width)).sigma * width;
      }
      CHECK(std::abs(f.opacity(u, v) - (1.0 - std::exp(-tau))) < 1e-9);
    }
  }
}

TEST_CASE("gt_render converges as the step count doubles") {
  const AnalyticScene scene = builtin_scene("slab");
  const TopDown cam = top_down(3.0);
  auto at = [&](int n) { return gt_render(scene, cam.intr, cam.pose, n).intensity(0, 0); };
  const double i64 = at(64), i128 = at(128), i256 = at(256), i512 = at(512);
  CHECK(std::abs(i256 - i128) < std::abs(i128 - i64));
  CHECK(std::abs(i512 - i256) < std::abs(i256 - i128));
}

TEST_CASE("scene validation") {
  CHECK_THROWS_AS(gt_render(AnalyticScene{}, CameraIntrinsics::centered(2, 2, 1), Pose(), 63),
                  ArgumentError);
  AnalyticScene bad = layer_scene(1.0, 1.0, 1.0);
  bad.primitives[0].density = -1;
  CHECK_THROWS_AS(bad.validate(), ArgumentError);
  bad = layer_scene(1.0, 1.0, -0.5);
  CHECK_THROWS_AS(bad.validate(), ArgumentError);
  bad = layer_scene(1.0, 1.0, 1.0);
  bad.background = -1;
  CHECK_THROWS_AS(bad.validate(), ArgumentError);
}

TEST_CASE("textures") {
  Texture radial;
  radial.kind = Texture::Kind::kRadial;
  radial.a = 0.1;
  radial.b = 10.0;
  radial.radius = 2.0;
  CHECK(radial.eval(Vec3::Zero()) == doctest::Approx(0.1));
  CHECK(radial.eval(Vec3(1, 0, 0)) == doctest::Approx(1.0));
  CHECK(radial.eval(Vec3(5, 0, 0)) == doctest::Approx(10.0));

  Texture checker;
  checker.kind = Texture::Kind::kChecker;
  checker.a = 0.2;
  checker.b = 0.8;
  checker.cell = 1.0;
  CHECK(checker.eval(Vec3(0.5, 0.5, 0)) == doctest::Approx(0.8));
  CHECK(checker.eval(Vec3(1.5, 0.5, 0)) == doctest::Approx(0.2));
}

}  // namespace evnerf
