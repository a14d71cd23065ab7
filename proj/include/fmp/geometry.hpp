#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

namespace fmp {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  constexpr Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  constexpr Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  constexpr bool operator==(const Vec3&) const = default;

  double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
};

inline constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }

inline double distance(const Vec3& a, const Vec3& b) { return norm(a - b); }

/// Unit vector along v; the zero vector is returned unchanged.
inline Vec3 normalized(const Vec3& v) {
  const double n = norm(v);
  return n > 0.0 ? v * (1.0 / n) : v;
}

/// Angle in [0, pi] between two non-zero vectors.
inline double angle_between(const Vec3& a, const Vec3& b) {
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) return std::numbers::pi;
  const double c = std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
  return std::acos(c);
}

inline bool is_finite(const Vec3& v) {
  return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
}

inline constexpr double degrees(double deg) { return deg * std::numbers::pi / 180.0; }

/// Axis-aligned box, used both for room bounds and for opaque furniture.
struct Box {
  Vec3 lo;
  Vec3 hi;

  bool contains(const Vec3& p) const {
    return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y && p.z >= lo.z && p.z <= hi.z;
  }
  Vec3 center() const { return (lo + hi) * 0.5; }
  bool operator==(const Box&) const = default;
};

/// True when the open segment from `from` to `to` passes through the box.
/// A target lying inside the box counts as blocked; the far endpoint touching
/// the surface does not.
inline bool segment_hits_box(const Vec3& from, const Vec3& to, const Box& box) {
  constexpr double kEndSlack = 1e-9;
  double t0 = 0.0;
  double t1 = 1.0;
  const Vec3 d = to - from;
  for (int axis = 0; axis < 3; ++axis) {
    const double o = from[axis];
    const double dv = d[axis];
    const double lo = box.lo[axis];
    const double hi = box.hi[axis];
    if (std::abs(dv) < 1e-15) {
      if (o < lo || o > hi) return false;
      continue;
    }
    double ta = (lo - o) / dv;
    double tb = (hi - o) / dv;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  return t0 < 1.0 - kEndSlack;
}

}  // namespace fmp
