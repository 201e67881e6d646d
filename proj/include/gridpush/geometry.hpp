#pragma once

// Planar polygon helpers for support surfaces and obstacles.

#include "gridpush/common.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <vector>

namespace gridpush {

using Polygon = std::vector<Vec2>;

inline Real signed_area(const Polygon& p) {
  Real a = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Vec2& u = p[i];
    const Vec2& v = p[(i + 1) % p.size()];
    a += u.x() * v.y() - v.x() * u.y();
  }
  return 0.5 * a;
}

inline Real cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

// Closed-segment intersection test.
inline bool segments_intersect(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
  auto orient = [](const Vec2& p, const Vec2& q, const Vec2& r) {
    const Real v = cross2(q - p, r - p);
    return (v > 0) - (v < 0);
  };
  auto on_segment = [](const Vec2& p, const Vec2& q, const Vec2& r) {
    return std::min(p.x(), q.x()) <= r.x() && r.x() <= std::max(p.x(), q.x()) && std::min(p.y(), q.y()) <= r.y() &&
           r.y() <= std::max(p.y(), q.y());
  };
  const int o1 = orient(a, b, c), o2 = orient(a, b, d), o3 = orient(c, d, a), o4 = orient(c, d, b);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(a, b, c)) return true;
  if (o2 == 0 && on_segment(a, b, d)) return true;
  if (o3 == 0 && on_segment(c, d, a)) return true;
  if (o4 == 0 && on_segment(c, d, b)) return true;
  return false;
}

// True when no two non-adjacent edges meet and the polygon has area.
inline bool is_simple(const Polygon& p) {
  const std::size_t k = p.size();
  if (k < 3 || std::abs(signed_area(p)) <= 0.0) return false;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j) {
      if (j == i + 1 || (i == 0 && j == k - 1)) continue;
      if (segments_intersect(p[i], p[(i + 1) % k], p[j], p[(j + 1) % k])) return false;
    }
  return true;
}

inline bool point_in_polygon(const Vec2& q, const Polygon& p) {
  bool inside = false;
  for (std::size_t i = 0, j = p.size() - 1; i < p.size(); j = i++) {
    const Vec2 &a = p[i], &b = p[j];
    if ((a.y() > q.y()) != (b.y() > q.y()) && q.x() < (b.x() - a.x()) * (q.y() - a.y()) / (b.y() - a.y()) + a.x())
      inside = !inside;
  }
  return inside;
}

inline Real point_segment_distance(const Vec2& q, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const Real len2 = ab.squaredNorm();
  const Real t = len2 > 0.0 ? std::clamp((q - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (q - (a + t * ab)).norm();
}

inline Real distance_to_boundary(const Vec2& q, const Polygon& p) {
  Real d = std::numeric_limits<Real>::infinity();
  for (std::size_t i = 0; i < p.size(); ++i) d = std::min(d, point_segment_distance(q, p[i], p[(i + 1) % p.size()]));
  return d;
}

// Positive inside, negative outside.
inline Real signed_distance(const Vec2& q, const Polygon& p) {
  const Real d = distance_to_boundary(q, p);
  return point_in_polygon(q, p) ? d : -d;
}

inline std::array<Vec2, 4> square_corners(const Vec2& center, Real half, Real theta) {
  std::array<Vec2, 4> c{Vec2(half, half), Vec2(-half, half), Vec2(-half, -half), Vec2(half, -half)};
  for (auto& v : c) v = center + rotate(v, theta);
  return c;
}

// Overlap test between a rotated square and a polygon of any shape.
inline bool square_overlaps_polygon(const Vec2& center, Real half, Real theta, const Polygon& p) {
  const auto sq = square_corners(center, half, theta);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < p.size(); ++j)
      if (segments_intersect(sq[i], sq[(i + 1) % 4], p[j], p[(j + 1) % p.size()])) return true;
  if (point_in_polygon(center, p)) return true;
  const Polygon square(sq.begin(), sq.end());
  return !p.empty() && point_in_polygon(p.front(), square);
}

struct Box2 {
  Vec2 lo;
  Vec2 hi;
};

inline Box2 bounding_box(const Polygon& p) {
  Box2 b{Vec2::Constant(std::numeric_limits<Real>::infinity()), Vec2::Constant(-std::numeric_limits<Real>::infinity())};
  for (const auto& v : p) {
    b.lo = b.lo.cwiseMin(v);
    b.hi = b.hi.cwiseMax(v);
  }
  return b;
}

inline Polygon rectangle(Real x0, Real y0, Real x1, Real y1) { return {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}; }

}  // namespace gridpush
