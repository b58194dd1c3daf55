// Copyright 2026 The evnerf Authors
// SPDX-License-Identifier: Apache-2.0

#include "evnerf/config.h"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "evnerf/errors.h"

namespace evnerf {

int SimConfig::subframes() const { return static_cast<int>(std::lround(fps * interval)); }

void RunConfig::validate() const {
  if (camera.width < 1 || camera.height < 1 || !(camera.focal > 0.0)) {
    throw ConfigError("camera needs positive size and focal length");
  }
  if (sim.intervals < 1) throw ConfigError("sim.intervals must be >= 1");
  if (!(sim.interval > 0.0) || sim.subframes() < 1) {
    throw ConfigError("sim.fps * sim.interval must be at least 1 frame");
  }
  if (!(sim.b_plus > 0.0) || !(sim.b_minus < 0.0)) throw ConfigError("sim thresholds need B+ > 0 > B-");
  if (!(sim.jitter_sigma >= 0.0) || !(sim.noise_ratio >= 0.0)) {
    throw ConfigError("sim noise parameters must be >= 0");
  }
  if (sim.gt_steps < 64 || eval.gt_steps < 64) throw ConfigError("gt_steps must be >= 64");
  if (eval.train_views < 1 || eval.novel_views < 0) throw ConfigError("bad eval view counts");
  if (n_coarse < 2 || n_fine < 0) throw ConfigError("need n_coarse >= 2 and n_fine >= 0");
  if (log_every < 0 || checkpoint_every < 0) throw ConfigError("log/checkpoint periods must be >= 0");
  field.validate();
  train.validate();
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
void parse_number(std::string_view v, T& out, long line) {
  T x{};
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || end != v.data() + v.size()) {
    throw DataError("cannot parse value '" + std::string(v) + "'", line);
  }
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(x)) throw DataError("non-finite value", line);
  }
  out = x;
}

void parse_bool(std::string_view v, bool& out, long line) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") {
    out = true;
  } else if (v == "false" || v == "0" || v == "off" || v == "no") {
    out = false;
  } else {
    throw DataError("expected a boolean, got '" + std::string(v) + "'", line);
  }
}

using Setter = std::function<void(std::string_view, long)>;
using Getter = std::function<std::string()>;

struct Key {
  Setter set;
  Getter get;
};

template <typename T>
Key bind(T& field) {
  Key k;
  k.set = [&field](std::string_view v, long line) {
    if constexpr (std::is_same_v<T, bool>) {
      parse_bool(v, field, line);
    } else if constexpr (std::is_same_v<T, std::string>) {
      field = std::string(v);
    } else {
      parse_number(v, field, line);
    }
  };
  k.get = [&field] {
    if constexpr (std::is_same_v<T, bool>) {
      return std::string(field ? "true" : "false");
    } else if constexpr (std::is_same_v<T, std::string>) {
      return field;
    } else {
      char buf[32];
      const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, field);
      return std::string(buf, end);
    }
  };
  return k;
}

// Section -> key -> binding, in file order.
using Schema = std::vector<std::pair<std::string, std::vector<std::pair<std::string, Key>>>>;

Schema schema(RunConfig& c) {
  return {
      {"scene", {{"name", bind(c.scene.name)}}},
      {"camera",
       {{"width", bind(c.camera.width)},
        {"height", bind(c.camera.height)},
        {"focal", bind(c.camera.focal)}}},
      {"sim",
       {{"intervals", bind(c.sim.intervals)},
        {"fps", bind(c.sim.fps)},
        {"interval", bind(c.sim.interval)},
        {"b_plus", bind(c.sim.b_plus)},
        {"b_minus", bind(c.sim.b_minus)},
        {"jitter_sigma", bind(c.sim.jitter_sigma)},
        {"noise_ratio", bind(c.sim.noise_ratio)},
        {"gt_steps", bind(c.sim.gt_steps)}}},
      {"train",
       {{"seed", bind(c.train.seed)},
        {"iterations", bind(c.train.iterations)},
        {"batch_rays", bind(c.train.batch_rays)},
        {"learning_rate", bind(c.train.adam.learning_rate)},
        {"beta1", bind(c.train.adam.beta1)},
        {"beta2", bind(c.train.adam.beta2)},
        {"adam_eps", bind(c.train.adam.eps)},
        {"lambda", bind(c.train.lambda)},
        {"noise_injection_ratio", bind(c.train.noise_injection_ratio)},
        {"joint_thresholds", bind(c.train.joint_thresholds)},
        {"threshold_init", bind(c.train.threshold_init)},
        {"fixed_threshold", bind(c.train.fixed_threshold)},
        {"clip_norm", bind(c.train.clip_norm)},
        {"density_noise", bind(c.train.density_noise)},
        {"lr_final_factor", bind(c.train.lr_final_factor)},
        {"workers", bind(c.train.workers)},
        {"n_coarse", bind(c.n_coarse)},
        {"n_fine", bind(c.n_fine)},
        {"depth", bind(c.field.depth)},
        {"width", bind(c.field.width)},
        {"freq_pos", bind(c.field.encoding.freq_pos)},
        {"freq_dir", bind(c.field.encoding.freq_dir)},
        {"include_raw", bind(c.field.encoding.include_raw)},
        {"sigma_init", bind(c.field.sigma_init)},
        {"luminance_prior", bind(c.field.luminance_prior)},
        {"checkpoint_every", bind(c.checkpoint_every)},
        {"log_every", bind(c.log_every)}}},
      {"eval",
       {{"train_views", bind(c.eval.train_views)},
        {"novel_views", bind(c.eval.novel_views)},
        {"novel_elevation_offset", bind(c.eval.novel_elevation_offset)},
        {"gt_steps", bind(c.eval.gt_steps)}}},
  };
}

}  // namespace

RunConfig parse_config(std::string_view text) {
  RunConfig cfg;
  const Schema sc = schema(cfg);
  const std::vector<std::pair<std::string, Key>>* section = nullptr;
  long line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw DataError("malformed section header", line_no);
      const std::string_view name = trim(line.substr(1, line.size() - 2));
      section = nullptr;
      for (const auto& [sname, keys] : sc) {
        if (sname == name) section = &keys;
      }
      if (!section) throw DataError("unknown section [" + std::string(name) + "]", line_no);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw DataError("expected 'key = value'", line_no);
    if (!section) throw DataError("key outside any section", line_no);
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    bool found = false;
    for (const auto& [kname, binding] : *section) {
      if (kname == key) {
        binding.set(value, line_no);
        found = true;
      }
    }
    if (!found) throw DataError("unknown key '" + std::string(key) + "'", line_no);
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

std::string format_config(const RunConfig& cfg) {
  RunConfig copy = cfg;
  const Schema sc = schema(copy);
  std::string out;
  for (const auto& [sname, keys] : sc) {
    if (!out.empty()) out += '\n';
    out += '[' + sname + "]\n";
    for (const auto& [kname, binding] : keys) out += kname + " = " + binding.get() + '\n';
  }
  return out;
}

}  // namespace evnerf
