#include "xmodal/scenegen.hpp"

#include <cmath>
#include <numeric>

#include "xmodal/error.hpp"
#include "xmodal/geometry.hpp"
#include "xmodal/seed.hpp"

namespace xmodal {

std::string_view name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "train";
}

Split split_from_name(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "validation") return Split::validation;
  if (s == "test") return Split::test;
  throw ConfigError("unknown split: " + std::string(s));
}

std::array<std::size_t, 3> DatasetManifest::split_counts() const {
  std::array<std::size_t, 3> counts{};
  for (const auto& s : samples) ++counts[std::size_t(s.split)];
  return counts;
}

SceneSpec sample_scene(std::uint64_t master_seed, std::uint64_t index) {
  Rng rng(derive_seed(master_seed, index, "scene"));
  SceneSpec spec;
  spec.shape = static_cast<ShapeKind>(rng.index(kShapeCount));
  spec.color = static_cast<FgColor>(rng.index(kFgColorCount));
  spec.position = static_cast<PositionBin>(rng.index(kPositionCount));
  do {
    spec.background = static_cast<BgColor>(rng.index(kBgColorCount));
  } while (!compatible(spec.color, spec.background));
  spec.scale = kMinScale + static_cast<int>(rng.index(kMaxScale - kMinScale + 1));
  spec.sample_seed = derive_seed(master_seed, index, "sample");
  return spec;
}

Raster render_scene(const SceneSpec& spec) {
  Raster raster(kImageSize, kImageSize, rgb(spec.background));
  const auto [cx, cy] = cell_center(spec.position, kImageSize, kImageSize);
  const Rgb fg = rgb(spec.color);
  geometry::for_each_span(spec.shape, cx, cy, spec.scale, kImageSize, kImageSize,
                          [&](int y, int x0, int x1) { raster.fill_span(y, x0, x1, fg); });
  return raster;
}

std::string make_caption(const SceneSpec& spec) {
  std::string out = "A ";
  out += name(spec.color);
  out += ' ';
  out += name(spec.shape);
  out += " at the ";
  out += name(spec.position);
  out += " on a ";
  out += name(spec.background);
  out += " background.";
  return out;
}

std::string_view neutral_caption() { return "A shape on a background."; }

Raster render_noise_image(std::uint64_t seed) {
  Raster raster(kImageSize, kImageSize);
  Rng rng(derive_seed(seed, 0, "noise-image"));
  auto bytes = raster.bytes();
  std::size_t i = 0;
  while (i < bytes.size()) {
    std::uint64_t word = rng.next_u64();
    for (int k = 0; k < 8 && i < bytes.size(); ++k, ++i) {
      bytes[i] = static_cast<std::uint8_t>(word & 0xff);
      word >>= 8;
    }
  }
  return raster;
}

std::string sample_id(std::size_t index) {
  std::string digits = std::to_string(index);
  if (digits.size() < 6) digits.insert(0, 6 - digits.size(), '0');
  return "s" + digits;
}

DatasetManifest generate_dataset(std::size_t n, std::uint64_t master_seed,
                                 SplitFractions fractions) {
  if (n < 1) throw ConfigError("dataset size must be at least 1");
  const double sum = fractions.train + fractions.validation + fractions.test;
  if (fractions.train < 0 || fractions.validation < 0 || fractions.test < 0 ||
      std::abs(sum - 1.0) > 1e-9) {
    throw ConfigError("split fractions must be non-negative and sum to 1");
  }

  const auto n_val = static_cast<std::size_t>(std::llround(fractions.validation * n));
  const auto n_test = std::min(n - n_val, static_cast<std::size_t>(std::llround(fractions.test * n)));

  // Seeded Fisher-Yates over indices; the first n_val go to validation, the
  // next n_test to test, the rest to train.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(master_seed, n, "split"));
  for (std::size_t i = n; i > 1; --i) {
    std::swap(order[i - 1], order[rng.index(i)]);
  }
  std::vector<Split> split(n, Split::train);
  for (std::size_t k = 0; k < n_val; ++k) split[order[k]] = Split::validation;
  for (std::size_t k = n_val; k < n_val + n_test; ++k) split[order[k]] = Split::test;

  DatasetManifest manifest;
  manifest.master_seed = master_seed;
  manifest.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Sample s;
    s.id = sample_id(i);
    s.spec = sample_scene(master_seed, i);
    s.caption = make_caption(s.spec);
    s.split = split[i];
    manifest.samples.push_back(std::move(s));
  }
  return manifest;
}

}  // namespace xmodal
