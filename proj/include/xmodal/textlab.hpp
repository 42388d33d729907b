#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "xmodal/scenegen.hpp"
#include "xmodal/vocab.hpp"

namespace xmodal {

struct ClaimedAttributes {
  ShapeKind shape = ShapeKind::circle;
  FgColor color = FgColor::red;
  PositionBin position = PositionBin::center;
  BgColor background = BgColor::white;

  friend bool operator==(const ClaimedAttributes&, const ClaimedAttributes&) = default;
};

ClaimedAttributes claimed_from_spec(const SceneSpec& spec);
std::string format_caption(const ClaimedAttributes& claim);

/// Raised for text outside the caption grammar; segment() is the first token
/// that failed to match (empty when the text ended early).
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, std::string segment)
      : std::runtime_error(message), segment_(std::move(segment)) {}
  const std::string& segment() const noexcept { return segment_; }

 private:
  std::string segment_;
};

/// Strict inverse of the template "A {color} {shape} at the {position} on a
/// {background} background."
ClaimedAttributes parse_caption(std::string_view text);
std::optional<ClaimedAttributes> try_parse_caption(std::string_view text);

enum class Strategy : std::uint8_t { shape_swap, color_swap, position_swap, random_text };
inline constexpr std::array<Strategy, 4> kAllStrategies = {
    Strategy::shape_swap, Strategy::color_swap, Strategy::position_swap, Strategy::random_text};

std::string_view name(Strategy s);
std::optional<Strategy> strategy_from_name(std::string_view s);

struct AttributeChange {
  std::string field;
  std::string old_value;
  std::string new_value;

  friend bool operator==(const AttributeChange&, const AttributeChange&) = default;
};

struct AdversarialVariant {
  std::string sample_id;
  Strategy strategy = Strategy::shape_swap;
  std::string caption;
  std::vector<AttributeChange> changed;

  friend bool operator==(const AdversarialVariant&, const AdversarialVariant&) = default;
};

/// Single-attribute strategies replace one field with a uniformly drawn
/// different value; random_text redraws shape, color and position (each
/// different from the original) and keeps the background. Throws ParseError
/// if the caption does not parse.
AdversarialVariant perturb(std::string_view caption, Strategy strategy, std::uint64_t seed);

/// One variant per (sample, strategy), sample-major in manifest order.
std::vector<AdversarialVariant> generate_adversarial_set(
    const DatasetManifest& manifest, std::uint64_t seed,
    const std::vector<Strategy>& strategies = {kAllStrategies.begin(), kAllStrategies.end()});

/// JSON Lines {sample_id, strategy, caption, changed: [{field, old, new}, ...]}.
std::string variants_to_jsonl(const std::vector<AdversarialVariant>& variants);
std::vector<AdversarialVariant> variants_from_jsonl(std::string_view text);
void write_variants(const std::filesystem::path& path,
                    const std::vector<AdversarialVariant>& variants);
std::vector<AdversarialVariant> read_variants(const std::filesystem::path& path);

}  // namespace xmodal
