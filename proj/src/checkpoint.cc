// Copyright 2026 The evnerf Authors
// SPDX-License-Identifier: Apache-2.0

#include "evnerf/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include <zlib.h>

#include "evnerf/errors.h"

namespace evnerf {

namespace {

constexpr std::uint32_t kFlagIncludeRaw = 1u << 0;
constexpr std::uint32_t kFlagState = 1u << 1;

class Writer {
 public:
  void bytes(const char* p, std::size_t n) { out_.insert(out_.end(), p, p + n); }
  void u32(std::uint32_t x) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(x >> (8 * i)));
  }
  void u64(std::uint64_t x) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(x >> (8 * i)));
  }
  void f32(float x) { u32(std::bit_cast<std::uint32_t>(x)); }
  void f64(double x) { u64(std::bit_cast<std::uint64_t>(x)); }
  std::vector<std::uint8_t>& data() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  Reader(const std::uint8_t* p, std::size_t n) : p_(p), n_(n) {}
  void need(std::size_t k) const {
    if (n_ - pos_ < k) throw DataError("checkpoint truncated at byte " + std::to_string(pos_));
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t x = 0;
    for (int i = 0; i < 4; ++i) x |= static_cast<std::uint32_t>(p_[pos_++]) << (8 * i);
    return x;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t x = 0;
    for (int i = 0; i < 8; ++i) x |= static_cast<std::uint64_t>(p_[pos_++]) << (8 * i);
    return x;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::size_t remaining() const { return n_ - pos_; }

 private:
  const std::uint8_t* p_;
  std::size_t n_;
  std::size_t pos_ = 0;
};

std::uint32_t crc_of(const std::uint8_t* p, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks for very large models.
  while (n > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, p, chunk);
    p += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Model& model, const TrainState* state) {
  const FieldConfig& fc = model.field.config();
  const RenderSettings& rs = model.render;
  Writer w;
  w.bytes("EVNF", 4);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(fc.depth));
  w.u32(static_cast<std::uint32_t>(fc.width));
  w.u32(static_cast<std::uint32_t>(fc.encoding.freq_pos));
  w.u32(static_cast<std::uint32_t>(fc.encoding.freq_dir));
  w.u32((fc.encoding.include_raw ? kFlagIncludeRaw : 0u) | (state ? kFlagState : 0u));
  w.f64(fc.sigma_init);
  w.f64(fc.luminance_prior);
  w.f64(rs.range.near);
  w.f64(rs.range.far);
  for (int c = 0; c < 3; ++c) w.f64(rs.bounds_center[c]);
  w.f64(rs.bounds_half_extent);
  w.f64(rs.delta_max);
  w.u32(static_cast<std::uint32_t>(rs.n_coarse));
  w.u32(static_cast<std::uint32_t>(rs.n_fine));

  const auto params = model.field.values();
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (float x : params) w.f32(x);
  w.u32(static_cast<std::uint32_t>(model.thresholds.intervals()));
  for (double x : model.thresholds.raw()) w.f64(x);

  if (state) {
    if (state->field_opt.size() != params.size() ||
        state->threshold_opt.size() != model.thresholds.raw().size()) {
      throw ConfigError("optimizer state does not match the model");
    }
    w.u64(state->iteration);
    w.u64(state->field_opt.steps());
    for (float x : state->field_opt.first_moment()) w.f32(x);
    for (float x : state->field_opt.second_moment()) w.f32(x);
    w.u64(state->threshold_opt.steps());
    for (double x : state->threshold_opt.first_moment()) w.f64(x);
    for (double x : state->threshold_opt.second_moment()) w.f64(x);
  }
  auto& out = w.data();
  const std::uint32_t crc = crc_of(out.data(), out.size());
  w.u32(crc);
  return std::move(out);
}

Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "EVNF", 4) != 0) {
    throw DataError("not an EVNF checkpoint");
  }
  const std::size_t body = bytes.size() - 4;
  Reader trailer(bytes.data() + body, 4);
  if (trailer.u32() != crc_of(bytes.data(), body)) throw DataError("checkpoint CRC mismatch");

  Reader r(bytes.data() + 4, body - 4);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  FieldConfig fc;
  fc.depth = static_cast<int>(r.u32());
  fc.width = static_cast<int>(r.u32());
  fc.encoding.freq_pos = static_cast<int>(r.u32());
  fc.encoding.freq_dir = static_cast<int>(r.u32());
  const std::uint32_t flags = r.u32();
  fc.encoding.include_raw = (flags & kFlagIncludeRaw) != 0;
  fc.sigma_init = r.f64();
  fc.luminance_prior = r.f64();
  RenderSettings rs;
  rs.range.near = r.f64();
  rs.range.far = r.f64();
  for (int c = 0; c < 3; ++c) rs.bounds_center[c] = r.f64();
  rs.bounds_half_extent = r.f64();
  rs.delta_max = r.f64();
  rs.n_coarse = static_cast<int>(r.u32());
  rs.n_fine = static_cast<int>(r.u32());
  try {
    fc.validate();
    rs.validate();
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint header: ") + e.what());
  }

  Checkpoint ck{Model{FieldParams<float>(fc), ThresholdSet(), rs}, std::nullopt};
  const std::uint32_t n_params = r.u32();
  if (n_params != ck.model.field.size()) {
    throw DataError("checkpoint parameter count does not match its architecture");
  }
  r.need(4ull * n_params);
  for (float& x : ck.model.field.values()) x = r.f32();
  ck.model.field.mark_modified();
  const std::uint32_t intervals = r.u32();
  r.need(16ull * intervals);
  ck.model.thresholds = ThresholdSet(static_cast<int>(intervals), 1.0, -1.0);
  for (double& x : ck.model.thresholds.raw()) x = r.f64();

  if (flags & kFlagState) {
    TrainState st{Adam<float>(n_params), Adam<double>(2ull * intervals), 0};
    st.iteration = r.u64();
    st.field_opt.set_steps(r.u64());
    r.need(8ull * n_params);
    for (float& x : st.field_opt.first_moment()) x = r.f32();
    for (float& x : st.field_opt.second_moment()) x = r.f32();
    st.threshold_opt.set_steps(r.u64());
    r.need(32ull * intervals);
    for (double& x : st.threshold_opt.first_moment()) x = r.f64();
    for (double& x : st.threshold_opt.second_moment()) x = r.f64();
    ck.state = std::move(st);
  }
  if (r.remaining() != 0) throw DataError("trailing bytes in checkpoint");
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const TrainState* state) {
  const std::vector<std::uint8_t> bytes = serialize_checkpoint(model, state);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace evnerf
