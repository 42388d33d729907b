#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "xmodal/raster.hpp"
#include "xmodal/vocab.hpp"

namespace xmodal {

inline constexpr int kMinScale = 86;
inline constexpr int kMaxScale = 106;

struct SceneSpec {
  ShapeKind shape = ShapeKind::circle;
  FgColor color = FgColor::red;
  PositionBin position = PositionBin::center;
  BgColor background = BgColor::white;
  int scale = 96;  ///< nominal half-extent in pixels
  std::uint64_t sample_seed = 0;

  friend bool operator==(const SceneSpec&, const SceneSpec&) = default;
};

enum class Split : std::uint8_t { train, validation, test };
std::string_view name(Split s);
Split split_from_name(std::string_view s);

struct Sample {
  std::string id;
  SceneSpec spec;
  std::string caption;
  Split split = Split::train;
  std::string image_path;  ///< relative to the manifest directory; empty if in-memory only
};

struct SplitFractions {
  double train = 0.6;
  double validation = 0.2;
  double test = 0.2;
};

struct DatasetManifest {
  std::uint64_t master_seed = 0;
  std::vector<Sample> samples;

  std::array<std::size_t, 3> split_counts() const;
};

/// Attributes drawn uniformly; the background is re-drawn until it is at least
/// kMinPaletteSeparation away from the foreground.
SceneSpec sample_scene(std::uint64_t master_seed, std::uint64_t index);

Raster render_scene(const SceneSpec& spec);

std::string make_caption(const SceneSpec& spec);

/// The uninformative caption used for the image-only condition.
std::string_view neutral_caption();

Raster render_noise_image(std::uint64_t seed);

/// Throws ConfigError when n < 1 or the fractions are negative or do not sum
/// to one.
DatasetManifest generate_dataset(std::size_t n, std::uint64_t master_seed,
                                 SplitFractions fractions = {});

std::string sample_id(std::size_t index);

}  // namespace xmodal
