#include <doctest.h>

#include <set>

#include "xmodal/seed.hpp"
#include "xmodal/textlab.hpp"

using namespace xmodal;

namespace {
constexpr std::string_view kCaption = "A red circle at the center on a white background.";

int differing_fields(const ClaimedAttributes& a, const ClaimedAttributes& b) {
  return (a.shape != b.shape) + (a.color != b.color) + (a.position != b.position) +
         (a.background != b.background);
}
}  // namespace

TEST_CASE("parse_caption") {
  const auto c = parse_caption(kCaption);
  CHECK(c.color == FgColor::red);
  CHECK(c.shape == ShapeKind::circle);
  CHECK(c.position == PositionBin::center);
  CHECK(c.background == BgColor::white);
  CHECK(format_caption(c) == kCaption);

  CHECK_THROWS_AS(parse_caption("A shape on a background."), ParseError);
  try {
    parse_caption("A red blob at the center on a white background.");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.segment().find("blob") != std::string::npos);
  }
  CHECK_FALSE(try_parse_caption("").has_value());
  CHECK_FALSE(try_parse_caption("A red circle at the center on a white background").has_value());
  CHECK(try_parse_caption("A light-blue? no").has_value() == false);
}

TEST_CASE("single-field swaps change exactly one field") {
  const auto original = parse_caption(kCaption);
  for (Strategy s : {Strategy::shape_swap, Strategy::color_swap, Strategy::position_swap}) {
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
      const auto v = perturb(kCaption, s, seed);
      const auto got = parse_caption(v.caption);
      REQUIRE(differing_fields(original, got) == 1);
      REQUIRE(v.changed.size() == 1);
      switch (s) {
        case Strategy::shape_swap: CHECK(got.shape != original.shape); break;
        case Strategy::color_swap: CHECK(got.color != original.color); break;
        default: CHECK(got.position != original.position); break;
      }
    }
  }
}

TEST_CASE("random_text resamples shape, color and position") {
  const auto original = parse_caption(kCaption);
  std::set<std::string> seen;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto v = perturb(kCaption, Strategy::random_text, seed);
    const auto got = parse_caption(v.caption);
    CHECK(got.shape != original.shape);
    CHECK(got.color != original.color);
    CHECK(got.position != original.position);
    CHECK(got.background == original.background);
    CHECK(v.changed.size() == 3);
    seen.insert(v.caption);
  }
  CHECK(seen.size() > 100);
}

TEST_CASE("perturb is deterministic and the swap draws are uniform") {
  CHECK(perturb(kCaption, Strategy::color_swap, 7) == perturb(kCaption, Strategy::color_swap, 7));
  std::array<int, kShapeCount> counts{};
  for (std::uint64_t seed = 0; seed < 7000; ++seed)
    ++counts[std::size_t(parse_caption(perturb(kCaption, Strategy::shape_swap, seed).caption).shape)];
  CHECK(counts[0] == 0);
  for (int k = 1; k < kShapeCount; ++k) {
    CHECK(counts[k] > 850);
    CHECK(counts[k] < 1150);
  }
}

TEST_CASE("adversarial set over a manifest") {
  const auto m = generate_dataset(1000, 42);
  const auto variants = generate_adversarial_set(m, 42);
  REQUIRE(variants.size() == 4000);
  CHECK(variants == generate_adversarial_set(m, 42));
  CHECK(variants_from_jsonl(variants_to_jsonl(variants)) == variants);
  std::size_t i = 0;
  for (const auto& s : m.samples) {
    for (Strategy st : kAllStrategies) {
      REQUIRE(variants[i].sample_id == s.id);
      CHECK(variants[i].strategy == st);
      ++i;
    }
  }
  const auto two = generate_adversarial_set(m, 42, {Strategy::color_swap, Strategy::random_text});
  CHECK(two.size() == 2000);
}

TEST_CASE("strategy names") {
  for (Strategy s : kAllStrategies) CHECK(strategy_from_name(name(s)) == s);
  CHECK_FALSE(strategy_from_name("synonym").has_value());
}
