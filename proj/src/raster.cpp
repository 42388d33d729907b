#include "xmodal/raster.hpp"

#include <algorithm>

namespace xmodal {

Raster::Raster(int width, int height, Rgb fill)
    : width_(width), height_(height),
      data_(static_cast<std::size_t>(width) * height * 3) {
  for (std::size_t i = 0; i < data_.size(); i += 3) {
    data_[i] = fill.r;
    data_[i + 1] = fill.g;
    data_[i + 2] = fill.b;
  }
}

void Raster::fill_span(int y, int x0, int x1, Rgb c) noexcept {
  x0 = std::max(x0, 0);
  x1 = std::min(x1, width_);
  for (int x = x0; x < x1; ++x) set(x, y, c);
}

std::uint64_t raster_digest(const Raster& raster) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint8_t byte) {
    h ^= byte;
    h *= 0x100000001b3ULL;
  };
  for (int v : {raster.width(), raster.height()}) {
    for (int k = 0; k < 4; ++k) mix(static_cast<std::uint8_t>(v >> (8 * k)));
  }
  for (std::uint8_t byte : raster.bytes()) mix(byte);
  return h;
}

}  // namespace xmodal
