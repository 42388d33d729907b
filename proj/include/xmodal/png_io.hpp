#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "xmodal/raster.hpp"

namespace xmodal {

/// 8-bit RGB, no alpha. Throws std::runtime_error on codec failure.
std::vector<std::uint8_t> encode_png(const Raster& raster);
Raster decode_png(const std::vector<std::uint8_t>& bytes);

void write_png(const std::filesystem::path& path, const Raster& raster);
Raster read_png(const std::filesystem::path& path);

}  // namespace xmodal
