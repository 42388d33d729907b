#include "xmodal/vision.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <vector>

#include "xmodal/geometry.hpp"

namespace xmodal {
namespace {

std::uint32_t pack(Rgb c) { return (std::uint32_t(c.r) << 16) | (std::uint32_t(c.g) << 8) | c.b; }
Rgb unpack(std::uint32_t v) {
  return {std::uint8_t(v >> 16), std::uint8_t(v >> 8), std::uint8_t(v)};
}

template <std::size_t N>
std::size_t nearest(const std::array<ColorSpec, N>& palette, double r, double g, double b) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < N; ++i) {
    const double dr = r - palette[i].rgb.r;
    const double dg = g - palette[i].rgb.g;
    const double db = b - palette[i].rgb.b;
    const double d = dr * dr + dg * dg + db * db;
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

// Foreground mask with per-row prefix counts for O(1) span intersection.
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;
  std::vector<int> prefix;  // (width + 1) entries per row

  bool at(int x, int y) const { return bits[std::size_t(y) * width + x] != 0; }
  int count(int y, int x0, int x1) const {
    const std::size_t row = std::size_t(y) * (width + 1);
    return prefix[row + x1] - prefix[row + x0];
  }
};

}  // namespace

BgColor estimate_background(const Raster& raster) {
  std::map<std::uint32_t, int> counts;
  const int w = raster.width();
  const int h = raster.height();
  for (int x = 0; x < w; ++x) {
    ++counts[pack(raster.at(x, 0))];
    if (h > 1) ++counts[pack(raster.at(x, h - 1))];
  }
  for (int y = 1; y + 1 < h; ++y) {
    ++counts[pack(raster.at(0, y))];
    if (w > 1) ++counts[pack(raster.at(w - 1, y))];
  }
  // Ties resolve to the smallest packed value (std::map order).
  std::uint32_t mode = 0;
  int best = -1;
  for (const auto& [key, n] : counts) {
    if (n > best) {
      best = n;
      mode = key;
    }
  }
  const Rgb c = unpack(mode);
  return static_cast<BgColor>(nearest(kBackgroundPalette, c.r, c.g, c.b));
}

ExtractedAttributes extract_attributes(const Raster& raster, const ExtractionConfig& config) {
  ExtractedAttributes out;
  const int w = raster.width();
  const int h = raster.height();
  const Rgb bg = rgb(estimate_background(raster));
  const double max_d2 = config.color_match_max_dist * config.color_match_max_dist;

  Mask mask{w, h, std::vector<std::uint8_t>(std::size_t(w) * h),
            std::vector<int>(std::size_t(w + 1) * h)};
  long area = 0;
  double sum_r = 0, sum_g = 0, sum_b = 0, sum_x = 0, sum_y = 0;
  int min_x = w, max_x = -1, min_y = h, max_y = -1;
  for (int y = 0; y < h; ++y) {
    int running = 0;
    const std::size_t row = std::size_t(y) * (w + 1);
    for (int x = 0; x < w; ++x) {
      const Rgb c = raster.at(x, y);
      if (squared_distance(c, bg) > max_d2) {
        mask.bits[std::size_t(y) * w + x] = 1;
        ++running;
        ++area;
        sum_r += c.r;
        sum_g += c.g;
        sum_b += c.b;
        sum_x += x + 0.5;
        sum_y += y + 0.5;
        min_x = std::min(min_x, x);
        max_x = std::max(max_x, x);
        min_y = std::min(min_y, y);
        max_y = std::max(max_y, y);
      }
      mask.prefix[row + x + 1] = running;
    }
  }
  if (area < config.min_foreground_area) return out;

  const double n = static_cast<double>(area);
  const auto color = static_cast<FgColor>(nearest(kForegroundPalette, sum_r / n, sum_g / n, sum_b / n));
  const PositionBin position = position_at(sum_x / n, sum_y / n, w, h);

  const Rgb fg = rgb(color);
  long pure = 0;
  for (int y = min_y; y <= max_y; ++y) {
    for (int x = min_x; x <= max_x; ++x) {
      if (mask.at(x, y) && squared_distance(raster.at(x, y), fg) <= max_d2) ++pure;
    }
  }
  out.color_confidence = pure / n;

  // Candidates are anchored at the cell center. The centroid of a shape cut
  // off by the canvas edge is biased, the cell center is not.
  const auto [cx, cy] = cell_center(position, w, h);
  const std::array<double, 4> measured = {cx - min_x, max_x + 1 - cx, cy - min_y, max_y + 1 - cy};
  const std::array<bool, 4> clipped = {min_x == 0, max_x == w - 1, min_y == 0, max_y == h - 1};

  auto iou_of = [&](ShapeKind kind, double r) {
    long inter = 0;
    long cand = 0;
    geometry::for_each_span(kind, cx, cy, r, w, h, [&](int y, int x0, int x1) {
      cand += x1 - x0;
      inter += mask.count(y, x0, x1);
    });
    return double(inter) / double(area + cand - inter);
  };

  double best_iou = -1.0;
  ShapeKind best_kind = ShapeKind::circle;
  for (int k = 0; k < kShapeCount; ++k) {
    const auto kind = static_cast<ShapeKind>(k);
    const auto unit = geometry::unit_extents(kind);
    double sum = 0.0;
    int sides = 0;
    for (int s = 0; s < 4; ++s) {
      if (clipped[s] || measured[s] <= 0.0) continue;
      sum += measured[s] / unit[s];
      ++sides;
    }
    if (sides == 0) continue;
    const double r0 = sum / sides;
    for (double dr : {0.0, -0.5, 0.5, -1.0, 1.0, -1.5, 1.5}) {
      const double iou = iou_of(kind, r0 + dr);
      if (iou > best_iou) {
        best_iou = iou;
        best_kind = kind;
      }
    }
  }
  out.shape_confidence = std::max(best_iou, 0.0);
  // The synthesized shape sits at the cell center, so its fit also vouches
  // for the position.
  out.position_confidence = out.shape_confidence;

  if (out.shape_confidence >= config.iou_accept) out.shape = best_kind;
  if (out.color_confidence >= config.iou_accept) out.color = color;
  if (out.position_confidence >= config.iou_accept) out.position = position;
  return out;
}

double agreement(const ExtractedAttributes& extracted, const ClaimedAttributes& claimed) {
  const double shape = extracted.shape ? (*extracted.shape == claimed.shape ? 1.0 : 0.0)
                                       : 1.0 / kShapeCount;
  const double color = extracted.color ? (*extracted.color == claimed.color ? 1.0 : 0.0)
                                        : 1.0 / kFgColorCount;
  const double position = extracted.position
                              ? (*extracted.position == claimed.position ? 1.0 : 0.0)
                              : 1.0 / kPositionCount;
  return (shape + color + position) / 3.0;
}

}  // namespace xmodal
