// Copyright 2026 The vfhand Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Basic planar math, action types, RNG aliases and binary IO helpers shared
// by every module of the variable-friction hand library.

#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace vf {

inline constexpr double kPi = 3.14159265358979323846;

inline constexpr double deg(double radians) { return radians * 180.0 / kPi; }
inline constexpr double rad(double degrees) { return degrees * kPi / 180.0; }

// Largest commanded joint sweep for a single action, in radians.
inline constexpr double kActionDeltaMax = 18.9 * kPi / 180.0;

// Number of discrete action modes: four friction-slide modes + two pivots.
inline constexpr int kNumModes = 6;

using Rng = std::mt19937_64;

// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  double w = std::remainder(a, 2.0 * kPi);
  if (w <= -kPi) w += 2.0 * kPi;
  return w;
}

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double k) const { return {x * k, y * k}; }
  Vec2 operator-() const { return {-x, -y}; }
  Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
  Vec2& operator-=(Vec2 o) { x -= o.x; y -= o.y; return *this; }
};

inline Vec2 operator*(double k, Vec2 v) { return {k * v.x, k * v.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline double norm2(Vec2 a) { return a.x * a.x + a.y * a.y; }
// Counter-clockwise quarter turn.
inline Vec2 perp(Vec2 a) { return {-a.y, a.x}; }
inline Vec2 rotate(Vec2 v, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

// Planar rigid pose / transform: rotation by theta followed by translation.
struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  Vec2 translation() const { return {x, y}; }
  // Body -> world.
  Vec2 apply(Vec2 p) const {
    const double c = std::cos(theta), s = std::sin(theta);
    return {c * p.x - s * p.y + x, s * p.x + c * p.y + y};
  }
  // World -> body.
  Vec2 apply_inverse(Vec2 p) const {
    const double c = std::cos(theta), s = std::sin(theta);
    const double dx = p.x - x, dy = p.y - y;
    return {c * dx + s * dy, -s * dx + c * dy};
  }
};

// a o b: apply b first, then a. Resulting theta is wrapped.
inline Pose2 compose(const Pose2& a, const Pose2& b) {
  const Vec2 t = a.apply({b.x, b.y});
  return {t.x, t.y, wrap_angle(a.theta + b.theta)};
}

// Pose of `child` expressed in the frame of `parent`: parent^-1 o child.
inline Pose2 relative_pose(const Pose2& parent, const Pose2& child) {
  const Vec2 t = parent.apply_inverse({child.x, child.y});
  return {t.x, t.y, wrap_angle(child.theta - parent.theta)};
}

enum class Side : uint8_t { Left = 0, Right = 1 };
inline Side other(Side s) { return s == Side::Left ? Side::Right : Side::Left; }
inline const char* to_string(Side s) { return s == Side::Left ? "left" : "right"; }

enum class FrictionMode : uint8_t { High = 0, Low = 1 };

// One step of the hybrid action space: a discrete mode picking the
// friction configuration and prescribed finger, plus a non-negative joint
// sweep magnitude in radians.
struct HybridAction {
  int mode = 0;
  double delta = 0.0;  // radians, in [0, kActionDeltaMax]
};

inline bool action_valid(const HybridAction& a) {
  return a.mode >= 0 && a.mode < kNumModes && std::isfinite(a.delta) &&
         a.delta >= 0.0 && a.delta <= kActionDeltaMax * (1.0 + 1e-12);
}

// ---------------------------------------------------------------------------
// Hashing and checksums.

// CRC-32 (IEEE 802.3 polynomial, reflected), as used by the dataset and
// checkpoint containers.
inline uint32_t crc32(const void* data, size_t len, uint32_t seed = 0) {
  static const auto table = [] {
    std::array<uint32_t, 256> t{};
    for (uint32_t i = 0; i < 256; ++i) {
      uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1u) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  uint32_t c = seed ^ 0xFFFFFFFFu;
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < len; ++i) c = table[(c ^ p[i]) & 0xFFu] ^ (c >> 8);
  return c ^ 0xFFFFFFFFu;
}

// FNV-1a, used for config fingerprints in manifests and dataset headers.
inline uint64_t fnv1a64(const void* data, size_t len, uint64_t seed = 14695981039346656037ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  uint64_t h = seed;
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

// ---------------------------------------------------------------------------
// Little-endian binary IO. The containers are specified little-endian; this
// library targets little-endian hosts and refuses to compile elsewhere.

static_assert(std::endian::native == std::endian::little,
              "binary containers assume a little-endian host");

class ByteWriter {
 public:
  void u8(uint8_t v) { raw(&v, 1); }
  void u32(uint32_t v) { raw(&v, 4); }
  void u64(uint64_t v) { raw(&v, 8); }
  void i32(int32_t v) { raw(&v, 4); }
  void f64(double v) { raw(&v, 8); }
  void str(const std::string& s) {
    u32(static_cast<uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  void magic(const char m[4]) { raw(m, 4); }
  void raw(const void* p, size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  // Appends the CRC-32 of everything written so far and returns the buffer.
  const std::vector<unsigned char>& finish_with_crc() {
    const uint32_t c = crc32(buf_.data(), buf_.size());
    u32(c);
    return buf_;
  }
  const std::vector<unsigned char>& bytes() const { return buf_; }

  void write_file(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out.write(reinterpret_cast<const char*>(buf_.data()),
              static_cast<std::streamsize>(buf_.size()));
    if (!out) throw std::runtime_error("short write: " + path);
  }

 private:
  std::vector<unsigned char> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::vector<unsigned char> bytes) : buf_(std::move(bytes)) {}

  static ByteReader from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    std::vector<unsigned char> b((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
    return ByteReader(std::move(b));
  }

  uint8_t u8() { uint8_t v; raw(&v, 1); return v; }
  uint32_t u32() { uint32_t v; raw(&v, 4); return v; }
  uint64_t u64() { uint64_t v; raw(&v, 8); return v; }
  int32_t i32() { int32_t v; raw(&v, 4); return v; }
  double f64() { double v; raw(&v, 8); return v; }
  std::string str() {
    const uint32_t n = u32();
    if (n > remaining()) throw std::runtime_error("corrupt container: string length");
    std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void expect_magic(const char m[4]) {
    char got[4];
    raw(got, 4);
    if (std::memcmp(got, m, 4) != 0)
      throw std::runtime_error("bad magic bytes: expected " + std::string(m, 4));
  }
  void raw(void* p, size_t n) {
    if (n > remaining()) throw std::runtime_error("corrupt container: truncated");
    std::memcpy(p, buf_.data() + pos_, n);
    pos_ += n;
  }
  size_t remaining() const { return buf_.size() - pos_; }
  size_t position() const { return pos_; }

  // Validates that the final 4 bytes hold the CRC-32 of everything before
  // them. Call before parsing; parsing then stops 4 bytes early.
  void verify_crc_trailer() {
    if (buf_.size() < 4) throw std::runtime_error("corrupt container: too short");
    const size_t body = buf_.size() - 4;
    uint32_t stored;
    std::memcpy(&stored, buf_.data() + body, 4);
    const uint32_t computed = crc32(buf_.data(), body);
    if (stored != computed) throw std::runtime_error("checksum mismatch");
    buf_.resize(body);
  }

 private:
  std::vector<unsigned char> buf_;
  size_t pos_ = 0;
};

}  // namespace vf
