#include "xmodal/vocab.hpp"

#include <algorithm>

namespace xmodal {
namespace {

template <typename Enum, typename Names, typename Project>
std::optional<Enum> lookup(const Names& names, std::string_view s, Project proj) {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (proj(names[i]) == s) return static_cast<Enum>(i);
  }
  return std::nullopt;
}

constexpr auto identity = [](std::string_view v) { return v; };
constexpr auto color_name = [](const ColorSpec& c) { return c.name; };

}  // namespace

std::optional<ShapeKind> shape_from_name(std::string_view s) {
  return lookup<ShapeKind>(kShapeNames, s, identity);
}
std::optional<FgColor> fg_color_from_name(std::string_view s) {
  return lookup<FgColor>(kForegroundPalette, s, color_name);
}
std::optional<BgColor> bg_color_from_name(std::string_view s) {
  return lookup<BgColor>(kBackgroundPalette, s, color_name);
}
std::optional<PositionBin> position_from_name(std::string_view s) {
  return lookup<PositionBin>(kPositionNames, s, identity);
}

PositionBin position_at(double x, double y, int width, int height) {
  const int col = std::clamp(int(x * 3.0 / width), 0, 2);
  const int row = std::clamp(int(y * 3.0 / height), 0, 2);
  return static_cast<PositionBin>(row * 3 + col);
}

}  // namespace xmodal
