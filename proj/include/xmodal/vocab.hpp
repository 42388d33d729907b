#pragma once

// Attribute vocabularies shared by the generator, caption grammar and
// extractor. Index order is part of the on-disk contract (seeded draws pick
// by index), so never reorder.

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <utility>

#include "xmodal/raster.hpp"

namespace xmodal {

enum class ShapeKind : std::uint8_t {
  circle, square, triangle, rectangle, ellipse, pentagon, hexagon, star
};

enum class FgColor : std::uint8_t {
  red, blue, green, yellow, orange, purple, pink, brown, black, gray
};

enum class BgColor : std::uint8_t { white, cream, light_gray, light_blue, charcoal };

/// 3x3 grid, row-major from the top-left cell.
enum class PositionBin : std::uint8_t {
  top_left, top_center, top_right,
  middle_left, center, middle_right,
  bottom_left, bottom_center, bottom_right
};

inline constexpr int kShapeCount = 8;
inline constexpr int kFgColorCount = 10;
inline constexpr int kBgColorCount = 5;
inline constexpr int kPositionCount = 9;

struct ColorSpec {
  std::string_view name;
  Rgb rgb;
};

inline constexpr std::array<std::string_view, kShapeCount> kShapeNames = {
    "circle", "square", "triangle", "rectangle",
    "ellipse", "pentagon", "hexagon", "star"};

inline constexpr std::array<ColorSpec, kFgColorCount> kForegroundPalette = {{
    {"red", {255, 0, 0}},
    {"blue", {0, 0, 255}},
    {"green", {0, 160, 0}},
    {"yellow", {255, 220, 0}},
    {"orange", {255, 140, 0}},
    {"purple", {140, 0, 200}},
    {"pink", {255, 105, 180}},
    {"brown", {139, 69, 19}},
    {"black", {0, 0, 0}},
    {"gray", {128, 128, 128}},
}};

inline constexpr std::array<ColorSpec, kBgColorCount> kBackgroundPalette = {{
    {"white", {255, 255, 255}},
    {"cream", {245, 240, 220}},
    {"light-gray", {210, 210, 210}},
    {"light-blue", {200, 225, 255}},
    {"charcoal", {40, 40, 40}},
}};

inline constexpr std::array<std::string_view, kPositionCount> kPositionNames = {
    "top-left", "top-center", "top-right",
    "middle-left", "center", "middle-right",
    "bottom-left", "bottom-center", "bottom-right"};

/// Foreground/background pairs closer than this are never generated.
inline constexpr int kMinPaletteSeparation = 100;

constexpr std::string_view name(ShapeKind s) { return kShapeNames[std::size_t(s)]; }
constexpr std::string_view name(FgColor c) { return kForegroundPalette[std::size_t(c)].name; }
constexpr std::string_view name(BgColor c) { return kBackgroundPalette[std::size_t(c)].name; }
constexpr std::string_view name(PositionBin p) { return kPositionNames[std::size_t(p)]; }

constexpr Rgb rgb(FgColor c) { return kForegroundPalette[std::size_t(c)].rgb; }
constexpr Rgb rgb(BgColor c) { return kBackgroundPalette[std::size_t(c)].rgb; }

std::optional<ShapeKind> shape_from_name(std::string_view s);
std::optional<FgColor> fg_color_from_name(std::string_view s);
std::optional<BgColor> bg_color_from_name(std::string_view s);
std::optional<PositionBin> position_from_name(std::string_view s);

constexpr bool compatible(FgColor fg, BgColor bg) {
  return squared_distance(rgb(fg), rgb(bg)) >= kMinPaletteSeparation * kMinPaletteSeparation;
}

/// Pixel coordinates of the bin's cell center in a width x height image.
constexpr std::pair<double, double> cell_center(PositionBin p, int width, int height) {
  const int col = int(p) % 3;
  const int row = int(p) / 3;
  return {width / 6.0 + col * (width / 3.0), height / 6.0 + row * (height / 3.0)};
}

/// Bin whose cell contains the point (x, y).
PositionBin position_at(double x, double y, int width, int height);

}  // namespace xmodal
