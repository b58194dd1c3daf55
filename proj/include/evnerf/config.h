// Copyright 2026 The evnerf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "evnerf/field.h"
#include "evnerf/trainer.h"

namespace evnerf {

struct SceneConfig {
  std::string name = "sphere_plane";
};

struct CameraConfig {
  int width = 64;
  int height = 64;
  double focal = 80.0;
};

struct SimConfig {
  int intervals = 60;         // keyframe intervals on the closed orbit
  double fps = 240.0;         // rendered frames per second
  double interval = 1.0 / 24; // seconds per interval
  double b_plus = 0.3;
  double b_minus = -0.3;
  double jitter_sigma = 0.0;
  double noise_ratio = 0.0;   // spurious events injected into the whole stream
  int gt_steps = 128;

  /// Rendered frames per interval, fps * interval rounded.
  int subframes() const;
};

struct EvalConfig {
  int train_views = 10;
  int novel_views = 10;
  double novel_elevation_offset = 5.0;  // degrees above the training orbit
  int gt_steps = 256;
};

struct RunConfig {
  SceneConfig scene;
  CameraConfig camera;
  SimConfig sim;
  TrainConfig train;
  FieldConfig field;
  int n_coarse = 64;
  int n_fine = 64;
  int checkpoint_every = 0;
  int log_every = 50;
  EvalConfig eval;

  void validate() const;
};

/// INI text with [scene] [camera] [sim] [train] [eval] sections; `#` and `;`
/// start comments. Unknown sections or keys and malformed values throw
/// DataError carrying the line number.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);
/// Every key with its current value; parse_config(format_config(c)) == c.
std::string format_config(const RunConfig& cfg);

}  // namespace evnerf
