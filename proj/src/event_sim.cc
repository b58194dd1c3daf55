// Copyright 2026 The evnerf Authors
// SPDX-License-Identifier: Apache-2.0

#include "evnerf/event_sim.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "evnerf/errors.h"
#include "evnerf/rng.h"

namespace evnerf {

bool event_before(const Event& a, const Event& b) {
  if (a.t != b.t) return a.t < b.t;
  if (a.v != b.v) return a.v < b.v;
  if (a.u != b.u) return a.u < b.u;
  return a.polarity < b.polarity;
}

void EventStream::validate() const {
  if (width <= 0 || height <= 0) throw DataError("event stream needs positive dimensions");
  if (!(t_start <= t_end)) throw DataError("event stream has t_start > t_end");
  for (std::size_t i = 0; i < events.size(); ++i) {
    const Event& e = events[i];
    if (e.u < 0 || e.u >= width || e.v < 0 || e.v >= height) {
      throw DataError("event " + std::to_string(i) + " outside the sensor");
    }
    if (e.polarity != 1 && e.polarity != -1) {
      throw DataError("event " + std::to_string(i) + " has polarity other than +-1");
    }
    if (!(e.t >= t_start && e.t < t_end)) {
      throw DataError("event " + std::to_string(i) + " outside [t_start, t_end)");
    }
    if (i > 0 && event_before(e, events[i - 1])) {
      throw DataError("events not sorted at index " + std::to_string(i));
    }
  }
}

PixelThresholds pixel_thresholds(int width, int height, double b_plus, double b_minus,
                                 const NoiseConfig& jitter) {
  if (!(b_plus > 0.0) || !(b_minus < 0.0)) throw ArgumentError("need B+ > 0 > B-");
  if (jitter.threshold_jitter_sigma < 0.0) throw ArgumentError("jitter sigma must be >= 0");
  PixelThresholds th{Image(width, height), Image(width, height)};
  Rng rng(jitter.seed);
  const double s = jitter.threshold_jitter_sigma;
  for (std::size_t i = 0; i < th.positive.size(); ++i) {
    double bp = b_plus;
    double bm = b_minus;
    if (s > 0.0) {
      bp += s * rng.normal();
      bm -= std::abs(s * rng.normal());
    }
    th.positive[i] = std::max(bp, kMinThresholdMagnitude);
    th.negative[i] = std::min(bm, -kMinThresholdMagnitude);
  }
  return th;
}

EventStream simulate_events(std::span<const LogFrame> frames, double b_plus, double b_minus,
                            const NoiseConfig& jitter) {
  if (frames.size() < 2) throw ArgumentError("event simulation needs at least 2 frames");
  const int w = frames[0].log_intensity.width();
  const int h = frames[0].log_intensity.height();
  for (std::size_t k = 0; k < frames.size(); ++k) {
    if (!frames[k].log_intensity.same_shape(frames[0].log_intensity)) {
      throw ArgumentError("log frames differ in size");
    }
    if (k > 0 && !(frames[k].t > frames[k - 1].t)) {
      throw ArgumentError("frame timestamps must be strictly increasing");
    }
    for (double x : frames[k].log_intensity.values()) {
      if (!std::isfinite(x)) {
        throw DataError("non-finite log intensity in frame " + std::to_string(k));
      }
    }
  }
  const PixelThresholds th = pixel_thresholds(w, h, b_plus, b_minus, jitter);

  EventStream out;
  out.width = w;
  out.height = h;
  out.t_start = frames.front().t;
  out.t_end = frames.back().t;

  Image ref = frames[0].log_intensity;
  // Largest fraction of a frame gap an event may use, so every event stays in
  // the half-open window of the transition that produced it.
  const double max_frac = 1.0 - 1e-9;
  for (std::size_t k = 1; k < frames.size(); ++k) {
    const Image& prev = frames[k - 1].log_intensity;
    const Image& next = frames[k].log_intensity;
    const double t0 = frames[k - 1].t;
    const double dt = frames[k].t - t0;
    for (int v = 0; v < h; ++v) {
      for (int u = 0; u < w; ++u) {
        const double l0 = prev(u, v);
        const double l1 = next(u, v);
        const double bp = th.positive(u, v);
        const double bm = th.negative(u, v);
        double& r = ref(u, v);
        const double span = l1 - l0;
        auto stamp = [&](double level) {
          const double frac = span != 0.0 ? std::clamp((level - l0) / span, 0.0, max_frac) : 0.0;
          return t0 + frac * dt;
        };
        while (l1 - r >= bp) {
          r += bp;
          out.events.push_back({stamp(r), u, v, 1});
        }
        while (l1 - r <= bm) {
          r += bm;
          out.events.push_back({stamp(r), u, v, -1});
        }
      }
    }
  }
  std::sort(out.events.begin(), out.events.end(), event_before);
  return out;
}

EventStream inject_noise(const EventStream& stream, double ratio, std::uint64_t seed) {
  if (!(ratio >= 0.0)) throw ArgumentError("noise ratio must be non-negative");
  EventStream out = stream;
  const auto n_add = static_cast<std::size_t>(
      std::floor(ratio * static_cast<double>(stream.events.size()) + 1e-9));
  if (n_add == 0) return out;
  if (!(stream.t_end > stream.t_start)) throw ArgumentError("noise needs a non-empty time window");
  Rng rng(seed);
  std::vector<Event> noise;
  noise.reserve(n_add);
  for (std::size_t i = 0; i < n_add; ++i) {
    Event e;
    e.u = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(stream.width)));
    e.v = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(stream.height)));
    e.t = std::min(rng.uniform(stream.t_start, stream.t_end),
                   std::nextafter(stream.t_end, stream.t_start));
    e.polarity = rng.bernoulli(0.5) ? 1 : -1;
    noise.push_back(e);
  }
  std::sort(noise.begin(), noise.end(), event_before);
  out.events.clear();
  out.events.reserve(stream.events.size() + n_add);
  std::merge(stream.events.begin(), stream.events.end(), noise.begin(), noise.end(),
             std::back_inserter(out.events), event_before);
  return out;
}

std::vector<EventCountGrid> count_events(const EventStream& stream,
                                         std::span<const double> interval_times) {
  if (interval_times.size() < 2) throw ArgumentError("count_events needs at least 2 times");
  for (std::size_t j = 1; j < interval_times.size(); ++j) {
    if (!(interval_times[j] > interval_times[j - 1])) {
      throw ArgumentError("interval times must be strictly increasing");
    }
  }
  if (interval_times.front() < stream.t_start || interval_times.back() > stream.t_end) {
    throw RangeError("interval times outside the stream window");
  }
  const std::size_t n_int = interval_times.size() - 1;
  std::vector<EventCountGrid> grids(n_int);
  for (std::size_t j = 0; j < n_int; ++j) {
    grids[j].n_pos = CountGrid(stream.width, stream.height, 0);
    grids[j].n_neg = CountGrid(stream.width, stream.height, 0);
    grids[j].index = static_cast<int>(j);
    grids[j].t_begin = interval_times[j];
    grids[j].t_end = interval_times[j + 1];
  }
  for (const Event& e : stream.events) {
    if (e.t < interval_times.front() || e.t >= interval_times.back()) continue;
    auto it = std::upper_bound(interval_times.begin(), interval_times.end(), e.t);
    const auto j = static_cast<std::size_t>(it - interval_times.begin()) - 1;
    if (e.polarity > 0) {
      ++grids[j].n_pos(e.u, e.v);
    } else {
      ++grids[j].n_neg(e.u, e.v);
    }
  }
  return grids;
}

EventStream slice_events(const EventStream& stream, double t0, double t1) {
  EventStream out;
  out.width = stream.width;
  out.height = stream.height;
  out.t_start = t0;
  out.t_end = t1;
  auto lo = std::lower_bound(stream.events.begin(), stream.events.end(), t0,
                             [](const Event& e, double t) { return e.t < t; });
  auto hi = std::lower_bound(lo, stream.events.end(), t1,
                             [](const Event& e, double t) { return e.t < t; });
  out.events.assign(lo, hi);
  return out;
}

}  // namespace evnerf
