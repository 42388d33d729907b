#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "xmodal/dataset_io.hpp"
#include "xmodal/error.hpp"
#include "xmodal/png_io.hpp"
#include "xmodal/scenegen.hpp"
#include "xmodal/textlab.hpp"

using namespace xmodal;

namespace {

const std::filesystem::path kGolden = std::filesystem::path(XMODAL_TEST_DIR) / "golden" / "render_digests.txt";

// Fixed specs covering every shape, every position and both palettes.
std::vector<SceneSpec> golden_specs() {
  std::vector<SceneSpec> specs;
  for (int s = 0; s < kShapeCount; ++s) {
    SceneSpec spec;
    spec.shape = ShapeKind(s);
    spec.color = FgColor(s % kFgColorCount);
    spec.position = PositionBin((s * 4) % kPositionCount);
    spec.background = (spec.color == FgColor::black) ? BgColor::light_blue : BgColor(s % kBgColorCount);
    if (!compatible(spec.color, spec.background)) spec.background = BgColor::white;
    spec.scale = kMinScale + (s * 3) % (kMaxScale - kMinScale + 1);
    specs.push_back(spec);
  }
  for (int p = 0; p < kPositionCount; ++p) {
    SceneSpec spec;
    spec.shape = ShapeKind::star;
    spec.color = FgColor::blue;
    spec.position = PositionBin(p);
    spec.scale = kMaxScale;
    specs.push_back(spec);
  }
  return specs;
}

std::string spec_key(const SceneSpec& s) {
  std::ostringstream os;
  os << name(s.shape) << ' ' << name(s.color) << ' ' << name(s.position) << ' '
     << name(s.background) << ' ' << s.scale;
  return os.str();
}

// Independent FNV-1a over (width, height as little-endian u32, pixels).
std::uint64_t fnv_digest(const Raster& r) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](unsigned char b) { h = (h ^ b) * 0x100000001b3ULL; };
  for (int v : {r.width(), r.height()})
    for (int k = 0; k < 4; ++k) mix((unsigned(v) >> (8 * k)) & 0xff);
  for (int y = 0; y < r.height(); ++y)
    for (int x = 0; x < r.width(); ++x) {
      const Rgb c = r.at(x, y);
      mix(c.r), mix(c.g), mix(c.b);
    }
  return h;
}

}  // namespace

TEST_CASE("sample_scene is deterministic and respects the palette rule") {
  CHECK(sample_scene(42, 0) == sample_scene(42, 0));
  for (std::uint64_t i = 0; i < 1000; ++i) {
    const auto s = sample_scene(42, i);
    REQUIRE(compatible(s.color, s.background));
    CHECK(s.scale >= kMinScale);
    CHECK(s.scale <= kMaxScale);
  }
}

TEST_CASE("shape frequencies over the first 1000 indices stay near uniform") {
  std::map<ShapeKind, int> tally;
  for (std::uint64_t i = 0; i < 1000; ++i) ++tally[sample_scene(42, i).shape];
  REQUIRE(tally.size() == std::size_t(kShapeCount));
  double chi2 = 0.0;
  for (const auto& [shape, n] : tally) {
    const double f = n / 1000.0;
    CHECK(f >= 0.085);
    CHECK(f <= 0.165);
    chi2 += (n - 125.0) * (n - 125.0) / 125.0;
  }
  // 7 dof, 0.999 quantile
  CHECK(chi2 < 24.32);
}

TEST_CASE("render_scene pixel examples") {
  SceneSpec spec;
  spec.shape = ShapeKind::circle;
  spec.color = FgColor::red;
  spec.position = PositionBin::center;
  spec.background = BgColor::white;
  spec.scale = 96;
  const Raster r = render_scene(spec);
  CHECK(r.width() == 320);
  CHECK(r.height() == 320);
  CHECK(r.at(160, 160) == Rgb{255, 0, 0});
  CHECK(r.at(0, 0) == Rgb{255, 255, 255});
}

TEST_CASE("foreground area exceeds the lower bound for every shape, position and scale") {
  for (int s = 0; s < kShapeCount; ++s) {
    for (int p = 0; p < kPositionCount; ++p) {
      for (int scale : {kMinScale, 96, kMaxScale}) {
        SceneSpec spec;
        spec.shape = ShapeKind(s);
        spec.position = PositionBin(p);
        spec.scale = scale;
        const Raster r = render_scene(spec);
        long count = 0;
        for (int y = 0; y < r.height(); ++y)
          for (int x = 0; x < r.width(); ++x) count += r.at(x, y) == rgb(spec.color);
        const double bound = 0.5 * M_PI * std::pow(0.8 * scale, 2);
        CAPTURE(spec_key(spec));
        CHECK(double(count) > bound);
      }
    }
  }
}

TEST_CASE("renders match the golden digests") {
  const auto specs = golden_specs();
  if (std::getenv("XMODAL_UPDATE_GOLDEN")) {
    std::ofstream out(kGolden);
    for (const auto& s : specs) out << spec_key(s) << ' ' << std::hex << fnv_digest(render_scene(s)) << std::dec << '\n';
  }
  std::ifstream in(kGolden);
  REQUIRE(in.good());
  std::map<std::string, std::uint64_t> golden;
  std::string line;
  while (std::getline(in, line)) {
    const auto cut = line.rfind(' ');
    golden[line.substr(0, cut)] = std::stoull(line.substr(cut + 1), nullptr, 16);
  }
  REQUIRE(golden.size() == specs.size());
  for (const auto& s : specs) {
    const Raster r = render_scene(s);
    CAPTURE(spec_key(s));
    CHECK(fnv_digest(r) == golden.at(spec_key(s)));
    CHECK(raster_digest(r) == fnv_digest(r));
  }
}

TEST_CASE("png round trip is lossless") {
  const Raster r = render_scene(sample_scene(42, 3));
  CHECK(decode_png(encode_png(r)) == r);
  CHECK(encode_png(r) == encode_png(r));
  const Raster noise = render_noise_image(9);
  CHECK(decode_png(encode_png(noise)) == noise);
}

TEST_CASE("captions") {
  SceneSpec spec;
  CHECK(make_caption(spec) == "A red circle at the center on a white background.");
  spec.color = FgColor::blue;
  spec.shape = ShapeKind::square;
  spec.position = PositionBin::top_left;
  spec.background = BgColor::charcoal;
  CHECK(make_caption(spec) == "A blue square at the top-left on a charcoal background.");
  CHECK(neutral_caption() == "A shape on a background.");
  for (std::uint64_t i = 0; i < 1000; ++i) {
    const auto s = sample_scene(42, i);
    CHECK(parse_caption(make_caption(s)) == claimed_from_spec(s));
  }
}

TEST_CASE("generate_dataset") {
  const auto m = generate_dataset(1000, 42);
  REQUIRE(m.samples.size() == 1000);
  const auto counts = m.split_counts();
  CHECK(counts[0] == 600);
  CHECK(counts[1] == 200);
  CHECK(counts[2] == 200);
  CHECK(manifest_to_jsonl(m) == manifest_to_jsonl(generate_dataset(1000, 42)));
  CHECK(manifest_from_jsonl(manifest_to_jsonl(m)).samples.size() == 1000);

  const auto one = generate_dataset(1, 7, SplitFractions{1.0, 0.0, 0.0});
  REQUIRE(one.samples.size() == 1);
  CHECK(one.samples[0].split == Split::train);

  CHECK_THROWS_AS(generate_dataset(10, 1, SplitFractions{0.5, 0.5, 0.5}), ConfigError);
  CHECK_THROWS_AS(generate_dataset(10, 1, SplitFractions{-0.1, 0.6, 0.5}), ConfigError);
  CHECK_THROWS_AS(generate_dataset(0, 1), ConfigError);
}

TEST_CASE("noise images are deterministic") {
  CHECK(render_noise_image(5) == render_noise_image(5));
  CHECK_FALSE(render_noise_image(5) == render_noise_image(6));
}
