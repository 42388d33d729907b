#pragma once

// Scanline coverage of the eight shape kinds. A pixel belongs to a shape iff
// its center (x + 0.5, y + 0.5) lies inside the outline; everything is hard
// edged. Vertex tables are literal constants rather than computed with
// sin/cos so coverage is bit-identical across libm implementations.

#include <algorithm>
#include <array>
#include <cmath>
#include <span>

#include "xmodal/vocab.hpp"

namespace xmodal::geometry {

struct Point {
  double x;
  double y;
};

/// Rectangle and ellipse minor half-axis, relative to the major half-axis.
inline constexpr double kMinorAxisRatio = 0.6;
/// Star inner-vertex radius relative to the outer radius.
inline constexpr double kStarInnerRatio = 0.45;

// Unit outlines, image coordinates (y grows downward), first vertex on top.
inline constexpr std::array<Point, 3> kTriangle = {{
    {0.0, -1.0}, {0.8660254037844386, 0.5}, {-0.8660254037844386, 0.5}}};

inline constexpr std::array<Point, 5> kPentagon = {{
    {0.0, -1.0},
    {0.9510565162951535, -0.3090169943749474},
    {0.5877852522924731, 0.8090169943749475},
    {-0.5877852522924731, 0.8090169943749475},
    {-0.9510565162951535, -0.3090169943749474}}};

inline constexpr std::array<Point, 6> kHexagon = {{
    {0.0, -1.0}, {0.8660254037844386, -0.5}, {0.8660254037844386, 0.5},
    {0.0, 1.0}, {-0.8660254037844386, 0.5}, {-0.8660254037844386, -0.5}}};

inline constexpr std::array<Point, 10> kStar = {{
    {0.0, -1.0},
    {0.5877852522924731 * kStarInnerRatio, -0.8090169943749475 * kStarInnerRatio},
    {0.9510565162951535, -0.3090169943749474},
    {0.9510565162951535 * kStarInnerRatio, 0.3090169943749474 * kStarInnerRatio},
    {0.5877852522924731, 0.8090169943749475},
    {0.0, 1.0 * kStarInnerRatio},
    {-0.5877852522924731, 0.8090169943749475},
    {-0.9510565162951535 * kStarInnerRatio, 0.3090169943749474 * kStarInnerRatio},
    {-0.9510565162951535, -0.3090169943749474},
    {-0.5877852522924731 * kStarInnerRatio, -0.8090169943749475 * kStarInnerRatio}}};

/// Half of max(bounding-box width, height) for a unit-size shape.
constexpr double extent_factor(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::triangle: return 0.8660254037844386;
    case ShapeKind::pentagon:
    case ShapeKind::star: return 0.9510565162951535;
    default: return 1.0;
  }
}

/// Distance from the center to the left, right, top and bottom edge of a
/// unit-size shape.
constexpr std::array<double, 4> unit_extents(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::ellipse:
    case ShapeKind::rectangle: return {1.0, 1.0, kMinorAxisRatio, kMinorAxisRatio};
    case ShapeKind::triangle: return {0.8660254037844386, 0.8660254037844386, 1.0, 0.5};
    case ShapeKind::pentagon:
    case ShapeKind::star:
      return {0.9510565162951535, 0.9510565162951535, 1.0, 0.8090169943749475};
    case ShapeKind::hexagon: return {0.8660254037844386, 0.8660254037844386, 1.0, 1.0};
    default: return {1.0, 1.0, 1.0, 1.0};
  }
}

namespace detail {

// First/last+1 pixel index whose center lies in [lo, hi).
inline void emit_interval(double lo, double hi, int y, int width, auto& fn) {
  const int x0 = std::max(0, static_cast<int>(std::ceil(lo - 0.5)));
  const int x1 = std::min(width, static_cast<int>(std::ceil(hi - 0.5)));
  if (x0 < x1) fn(y, x0, x1);
}

inline void polygon_row(std::span<const Point> unit, double cx, double cy, double r,
                        double yc, int y, int width, auto& fn) {
  std::array<double, 10> xs{};
  int count = 0;
  const std::size_t n = unit.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point a{cx + r * unit[i].x, cy + r * unit[i].y};
    const Point b{cx + r * unit[(i + 1) % n].x, cy + r * unit[(i + 1) % n].y};
    if ((a.y <= yc && yc < b.y) || (b.y <= yc && yc < a.y)) {
      xs[count++] = a.x + (yc - a.y) * (b.x - a.x) / (b.y - a.y);
    }
  }
  std::sort(xs.begin(), xs.begin() + count);
  for (int k = 0; k + 1 < count; k += 2) emit_interval(xs[k], xs[k + 1], y, width, fn);
}

}  // namespace detail

/// Calls fn(y, x0, x1) for every covered run [x0, x1) of row y, clipped to
/// the width x height canvas.
template <typename Fn>
void for_each_span(ShapeKind kind, double cx, double cy, double r, int width,
                   int height, Fn&& fn) {
  const int y_begin = std::max(0, static_cast<int>(std::floor(cy - r)) - 1);
  const int y_end = std::min(height, static_cast<int>(std::ceil(cy + r)) + 1);
  for (int y = y_begin; y < y_end; ++y) {
    const double yc = y + 0.5;
    const double dy = yc - cy;
    switch (kind) {
      case ShapeKind::circle:
        if (dy * dy < r * r) {
          const double dx = std::sqrt(r * r - dy * dy);
          detail::emit_interval(cx - dx, cx + dx, y, width, fn);
        }
        break;
      case ShapeKind::ellipse: {
        const double ry = r * kMinorAxisRatio;
        if (std::abs(dy) < ry) {
          const double t = dy / ry;
          const double dx = r * std::sqrt(1.0 - t * t);
          detail::emit_interval(cx - dx, cx + dx, y, width, fn);
        }
        break;
      }
      case ShapeKind::square:
        if (-r <= dy && dy < r) detail::emit_interval(cx - r, cx + r, y, width, fn);
        break;
      case ShapeKind::rectangle: {
        const double ry = r * kMinorAxisRatio;
        if (-ry <= dy && dy < ry) detail::emit_interval(cx - r, cx + r, y, width, fn);
        break;
      }
      case ShapeKind::triangle:
        detail::polygon_row(kTriangle, cx, cy, r, yc, y, width, fn);
        break;
      case ShapeKind::pentagon:
        detail::polygon_row(kPentagon, cx, cy, r, yc, y, width, fn);
        break;
      case ShapeKind::hexagon:
        detail::polygon_row(kHexagon, cx, cy, r, yc, y, width, fn);
        break;
      case ShapeKind::star:
        detail::polygon_row(kStar, cx, cy, r, yc, y, width, fn);
        break;
    }
  }
}

}  // namespace xmodal::geometry
