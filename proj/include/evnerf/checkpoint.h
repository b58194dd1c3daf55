// Copyright 2026 The evnerf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "evnerf/model.h"
#include "evnerf/trainer.h"

namespace evnerf {

// Layout (all little-endian):
//   "EVNF" u32 version
//   u32 depth, width, freq_pos, freq_dir, flags  (bit 0 include_raw, bit 1 optimizer state)
//   f64 sigma_init, luminance_prior
//   f64 near, far, center[3], half_extent, delta_max; u32 n_coarse, n_fine
//   u32 n_params, f32 params[n_params]            (FieldParams storage order)
//   u32 J, f64 log|B+|[J], f64 log|B-|[J]
//   [u64 iteration, u64 t, f32 m[n_params], f32 v[n_params],
//    u64 t, f64 m[2J], f64 v[2J]]                 (when bit 1 is set)
//   u32 crc32 of everything above
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  Model model;
  std::optional<TrainState> state;
};

std::vector<std::uint8_t> serialize_checkpoint(const Model& model, const TrainState* state);
/// Throws DataError on a bad magic, version, size or checksum.
Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);

/// Writes through a temporary file and a rename, so a crash never leaves a
/// truncated checkpoint behind.
void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const TrainState* state = nullptr);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace evnerf
