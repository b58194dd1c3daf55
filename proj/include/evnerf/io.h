// Copyright 2026 The evnerf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "evnerf/event_sim.h"
#include "evnerf/geometry.h"
#include "evnerf/image.h"

namespace evnerf {

struct SensorSize {
  int width = 0;
  int height = 0;
};

// Events: one `t u v p` line per event, p in {0, 1} on disk (0 = negative).
// The writer starts with `# width height t_start t_end`; the reader also
// accepts `# width height` or no header at all when `size` is given. Without
// a window in the header, the stream spans [first t, next double after last t).
void write_events(const std::filesystem::path& path, const EventStream& stream);
EventStream read_events(const std::filesystem::path& path,
                        std::optional<SensorSize> size = std::nullopt);

// Poses: one `t tx ty tz qx qy qz qw` line per pose; `#` lines are skipped.
void write_poses(const std::filesystem::path& path, const std::vector<StampedPose>& poses);
std::vector<StampedPose> read_poses(const std::filesystem::path& path);

/// Parses the 8 numbers of one pose line.
StampedPose parse_pose(const std::string& line, long line_number = 0);

// 16-bit binary PGM. Stored values are round(I * scale) clamped to
// [0, 65535]; the scale is kept in a `# scale <s>` comment. scale <= 0 picks
// 65535 / max(I).
double write_pgm16(const std::filesystem::path& path, const Image& image, double scale = 0.0);
struct PgmImage {
  Image image;  // stored value / scale
  double scale = 1.0;
};
PgmImage read_pgm16(const std::filesystem::path& path);

// EVF1: "EVF1" u32 width u32 height u32 channels (little-endian), then the
// channels one after another as row-major little-endian f32.
void write_evf(const std::filesystem::path& path, const std::vector<Image>& channels);
std::vector<Image> read_evf(const std::filesystem::path& path);

}  // namespace evnerf
