// Copyright 2026 The evnerf Authors
// SPDX-License-Identifier: Apache-2.0

#include "evnerf/io.h"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>
#include <string_view>

#include "evnerf/errors.h"

namespace evnerf {

namespace {

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t j = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > j) out.push_back(line.substr(j, i - j));
  }
  return out;
}

template <typename T>
T parse(std::string_view tok, long line, const char* what) {
  T value{};
  const auto [end, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc() || end != tok.data() + tok.size()) {
    throw DataError("cannot parse " + std::string(what) + " from '" + std::string(tok) + "'",
                    line);
  }
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(value)) throw DataError(std::string("non-finite ") + what, line);
  }
  return value;
}

// Shortest text that reads back to the same double.
void put(std::string& out, double x) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  out.append(buf, end);
}

void put(std::string& out, long long x) {
  char buf[24];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  out.append(buf, end);
}

std::ofstream open_out(const std::filesystem::path& path, bool binary) {
  std::ofstream f(path, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return f;
}

std::ifstream open_in(const std::filesystem::path& path, bool binary) {
  std::ifstream f(path, binary ? std::ios::binary : std::ios::in);
  if (!f) throw DataError("cannot open " + path.string());
  return f;
}

void finish(std::ofstream& f, const std::filesystem::path& path) {
  f.flush();
  if (!f) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace

void write_events(const std::filesystem::path& path, const EventStream& stream) {
  stream.validate();
  auto f = open_out(path, false);
  std::string buf = "# ";
  put(buf, static_cast<long long>(stream.width));
  buf += ' ';
  put(buf, static_cast<long long>(stream.height));
  buf += ' ';
  put(buf, stream.t_start);
  buf += ' ';
  put(buf, stream.t_end);
  buf += '\n';
  for (const Event& e : stream.events) {
    put(buf, e.t);
    buf += ' ';
    put(buf, static_cast<long long>(e.u));
    buf += ' ';
    put(buf, static_cast<long long>(e.v));
    buf += e.polarity > 0 ? " 1\n" : " 0\n";
    if (buf.size() > (1u << 20)) {
      f << buf;
      buf.clear();
    }
  }
  f << buf;
  finish(f, path);
}

EventStream read_events(const std::filesystem::path& path, std::optional<SensorSize> size) {
  auto f = open_in(path, false);
  EventStream s;
  bool have_window = false;
  std::string line;
  long n = 0;
  while (std::getline(f, line)) {
    ++n;
    const auto tok = split(line);
    if (tok.empty()) continue;
    if (tok[0].starts_with('#')) {
      if (n != 1) throw DataError("comment allowed only on the first line", n);
      std::vector<std::string_view> fields(tok.begin(), tok.end());
      if (fields[0] == "#") {
        fields.erase(fields.begin());
      } else {
        fields[0].remove_prefix(1);
      }
      if (fields.size() != 2 && fields.size() != 4) {
        throw DataError("header must be '# width height [t_start t_end]'", n);
      }
      s.width = parse<int>(fields[0], n, "width");
      s.height = parse<int>(fields[1], n, "height");
      if (fields.size() == 4) {
        s.t_start = parse<double>(fields[2], n, "t_start");
        s.t_end = parse<double>(fields[3], n, "t_end");
        have_window = true;
      }
      continue;
    }
    if (tok.size() != 4) throw DataError("expected 't u v p'", n);
    Event e;
    e.t = parse<double>(tok[0], n, "timestamp");
    e.u = parse<int>(tok[1], n, "u");
    e.v = parse<int>(tok[2], n, "v");
    const int p = parse<int>(tok[3], n, "polarity");
    if (p != 0 && p != 1) throw DataError("polarity must be 0 or 1", n);
    e.polarity = p == 1 ? 1 : -1;
    if (!s.events.empty() && e.t < s.events.back().t) {
      throw DataError("timestamps decrease", n);
    }
    if (size && s.width == 0) {
      s.width = size->width;
      s.height = size->height;
    }
    if (s.width <= 0 || s.height <= 0) {
      throw DataError("sensor size unknown: add a '# width height' header or pass it explicitly",
                      n);
    }
    if (e.u < 0 || e.u >= s.width || e.v < 0 || e.v >= s.height) {
      throw DataError("pixel outside the sensor", n);
    }
    s.events.push_back(e);
  }
  if (s.width == 0 && size) {
    s.width = size->width;
    s.height = size->height;
  }
  if (s.width <= 0 || s.height <= 0) throw DataError("sensor size unknown for " + path.string());
  if (!have_window) {
    if (s.events.empty()) {
      s.t_start = s.t_end = 0.0;
    } else {
      s.t_start = s.events.front().t;
      s.t_end = std::nextafter(s.events.back().t, std::numeric_limits<double>::infinity());
    }
  }
  // Files are time-ordered; equal timestamps may come in any pixel order.
  if (!std::is_sorted(s.events.begin(), s.events.end(), event_before)) {
    std::stable_sort(s.events.begin(), s.events.end(), event_before);
  }
  s.validate();
  return s;
}

StampedPose parse_pose(const std::string& line, long line_number) {
  const auto tok = split(line);
  if (tok.size() != 8) throw DataError("expected 't tx ty tz qx qy qz qw'", line_number);
  double v[8];
  for (int i = 0; i < 8; ++i) v[i] = parse<double>(tok[i], line_number, "pose value");
  const Quat q(v[7], v[4], v[5], v[6]);
  if (!(q.squaredNorm() > 0.0)) throw DataError("zero quaternion", line_number);
  return {v[0], Pose(q, Vec3(v[1], v[2], v[3]))};
}

void write_poses(const std::filesystem::path& path, const std::vector<StampedPose>& poses) {
  auto f = open_out(path, false);
  std::string buf = "# t tx ty tz qx qy qz qw\n";
  for (const StampedPose& p : poses) {
    const Vec3& t = p.pose.translation();
    const Quat& q = p.pose.rotation();
    const double v[8] = {p.t, t.x(), t.y(), t.z(), q.x(), q.y(), q.z(), q.w()};
    for (int i = 0; i < 8; ++i) {
      if (i) buf += ' ';
      put(buf, v[i]);
    }
    buf += '\n';
  }
  f << buf;
  finish(f, path);
}

std::vector<StampedPose> read_poses(const std::filesystem::path& path) {
  auto f = open_in(path, false);
  std::vector<StampedPose> out;
  std::string line;
  long n = 0;
  while (std::getline(f, line)) {
    ++n;
    const auto tok = split(line);
    if (tok.empty() || tok[0].starts_with('#')) continue;
    out.push_back(parse_pose(line, n));
  }
  return out;
}

double write_pgm16(const std::filesystem::path& path, const Image& image, double scale) {
  if (image.empty()) throw ArgumentError("cannot write an empty image");
  if (!(scale > 0.0)) {
    const double hi = *std::max_element(image.values().begin(), image.values().end());
    scale = hi > 0.0 ? 65535.0 / hi : 1.0;
  }
  auto f = open_out(path, true);
  std::string header = "P5\n# scale ";
  put(header, scale);
  header += '\n' + std::to_string(image.width()) + ' ' + std::to_string(image.height()) +
            "\n65535\n";
  f << header;
  std::vector<char> data(2 * image.size());
  for (std::size_t i = 0; i < image.size(); ++i) {
    const double q = std::clamp(std::round(image[i] * scale), 0.0, 65535.0);
    const auto x = static_cast<std::uint16_t>(q);
    data[2 * i] = static_cast<char>(x >> 8);  // PGM is big-endian
    data[2 * i + 1] = static_cast<char>(x & 0xff);
  }
  f.write(data.data(), static_cast<std::streamsize>(data.size()));
  finish(f, path);
  return scale;
}

PgmImage read_pgm16(const std::filesystem::path& path) {
  auto f = open_in(path, true);
  std::string magic;
  f >> magic;
  if (magic != "P5") throw DataError(path.string() + ": not a binary PGM");
  double scale = 1.0;
  std::vector<long> numbers;
  while (numbers.size() < 3) {
    f >> std::ws;
    if (f.peek() == '#') {
      std::string comment;
      std::getline(f, comment);
      const auto tok = split(comment);
      if (tok.size() == 3 && tok[1] == "scale") scale = parse<double>(tok[2], 0, "scale");
      continue;
    }
    long x;
    if (!(f >> x)) throw DataError(path.string() + ": malformed PGM header");
    numbers.push_back(x);
  }
  f.get();  // single whitespace before the raster
  if (numbers[2] != 65535) throw DataError(path.string() + ": expected maxval 65535");
  if (numbers[0] <= 0 || numbers[1] <= 0) throw DataError(path.string() + ": bad PGM size");
  PgmImage out{Image(static_cast<int>(numbers[0]), static_cast<int>(numbers[1])), scale};
  std::vector<unsigned char> data(2 * out.image.size());
  f.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (f.gcount() != static_cast<std::streamsize>(data.size())) {
    throw DataError(path.string() + ": truncated PGM raster");
  }
  for (std::size_t i = 0; i < out.image.size(); ++i) {
    out.image[i] = static_cast<double>((data[2 * i] << 8) | data[2 * i + 1]) / scale;
  }
  return out;
}

namespace {

void put_u32(std::string& out, std::uint32_t x) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((x >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

}  // namespace

void write_evf(const std::filesystem::path& path, const std::vector<Image>& channels) {
  if (channels.empty()) throw ArgumentError("EVF needs at least one channel");
  for (const Image& c : channels) {
    if (!c.same_shape(channels.front())) throw ArgumentError("EVF channels differ in size");
  }
  std::string buf = "EVF1";
  put_u32(buf, static_cast<std::uint32_t>(channels.front().width()));
  put_u32(buf, static_cast<std::uint32_t>(channels.front().height()));
  put_u32(buf, static_cast<std::uint32_t>(channels.size()));
  for (const Image& c : channels) {
    for (double x : c.values()) put_u32(buf, std::bit_cast<std::uint32_t>(static_cast<float>(x)));
  }
  auto f = open_out(path, true);
  f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  finish(f, path);
}

std::vector<Image> read_evf(const std::filesystem::path& path) {
  auto f = open_in(path, true);
  unsigned char header[16];
  f.read(reinterpret_cast<char*>(header), 16);
  if (f.gcount() != 16 || std::memcmp(header, "EVF1", 4) != 0) {
    throw DataError(path.string() + ": not an EVF1 file");
  }
  const std::uint32_t w = get_u32(header + 4);
  const std::uint32_t h = get_u32(header + 8);
  const std::uint32_t c = get_u32(header + 12);
  if (w == 0 || h == 0 || c == 0 || w > (1u << 16) || h > (1u << 16) || c > 1024) {
    throw DataError(path.string() + ": implausible EVF1 dimensions");
  }
  std::vector<Image> out;
  std::vector<unsigned char> data(4ull * w * h);
  for (std::uint32_t k = 0; k < c; ++k) {
    f.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (f.gcount() != static_cast<std::streamsize>(data.size())) {
      throw DataError(path.string() + ": truncated EVF1 data");
    }
    Image img(static_cast<int>(w), static_cast<int>(h));
    for (std::size_t i = 0; i < img.size(); ++i) {
      img[i] = std::bit_cast<float>(get_u32(data.data() + 4 * i));
    }
    out.push_back(std::move(img));
  }
  if (f.peek() != std::char_traits<char>::eof()) {
    throw DataError(path.string() + ": trailing bytes after EVF1 data");
  }
  return out;
}

}  // namespace evnerf
