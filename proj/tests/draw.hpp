#pragma once
// Raster helpers for building masks in tests.

#include <algorithm>
#include <cmath>

#include "endotrack/geom.hpp"
#include "endotrack/tiplocate/image.hpp"

namespace draw {

using endotrack::Vec2;
using endotrack::tiplocate::BinaryMask;

inline double segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double t = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

inline bool in_content(const BinaryMask& m, double x, double y) {
  const Vec2 c(0.5 * (m.width - 1), 0.5 * (m.height - 1));
  return (Vec2(x, y) - c).norm() <= 0.5 * m.width;
}

inline void capsule(BinaryMask& m, const Vec2& a, const Vec2& b, double radius, bool clip = true) {
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x)
      if (segment_distance(Vec2(x, y), a, b) <= radius && (!clip || in_content(m, x, y))) m.at(x, y) = 1;
}

/// One-pixel line (Bresenham).
inline void line(BinaryMask& m, int x0, int y0, int x1, int y1) {
  const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
  const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  for (;;) {
    if (m.inside(x0, y0)) m.at(x0, y0) = 1;
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

/// Point on the content circle of a square raster at angle `deg` (0 = +x, clockwise in image).
inline Vec2 rim(int size, double deg, double inset = 0.0) {
  const double r = 0.5 * size - inset, c = 0.5 * (size - 1);
  const double a = deg * 3.14159265358979323846 / 180.0;
  return {c + r * std::cos(a), c + r * std::sin(a)};
}

}  // namespace draw
