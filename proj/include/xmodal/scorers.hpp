#pragma once

#include <array>
#include <cstdint>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "xmodal/raster.hpp"
#include "xmodal/textlab.hpp"
#include "xmodal/vision.hpp"

namespace xmodal {

struct ScoreRequest {
  std::string_view pair_id;
  const Raster* image = nullptr;
  std::string_view text;
};

/// Maps (image, caption) to a similarity in [0, 1].
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual std::string name() const = 0;
  virtual bool deterministic() const { return true; }
  virtual double score(const Raster& image, std::string_view text, std::string_view pair_id) = 0;
  /// Order-preserving; the default scores one request at a time.
  virtual std::vector<double> score_batch(std::span<const ScoreRequest> batch);
};

/// Per-attribute values in shape, color, position order.
struct FieldTriple {
  double shape = 0.0;
  double color = 0.0;
  double position = 0.0;

  double operator[](std::size_t i) const { return i == 0 ? shape : i == 1 ? color : position; }
  double& operator[](std::size_t i) { return i == 0 ? shape : i == 1 ? color : position; }
  friend bool operator==(const FieldTriple&, const FieldTriple&) = default;
};

/// A synthetic scorer with tunable reliance on the caption.
///
///   s = clamp((1 - text_reliance) * v + text_reliance * t + noise_sigma * z, 0, 1)
///
/// t is 1 when the caption parses under the template grammar and 0 otherwise
/// (an unparseable caption is replaced by a seeded random claim). v is the
/// agreement between the extracted and claimed attributes after two
/// perturbations of each field f:
///   - deference: when the caption parses and the image's difficulty draw u
///     (one uniform per image, shared by all captions paired with it) is below
///     text_deference[f], the field is not checked and counts as agreeing;
///   - corruption: otherwise, with probability 1 - visual_reliability[f], the
///     extracted value is swapped for a uniformly drawn wrong one.
/// All draws are seeded from (persona_seed, pair_id) or (persona_seed, image
/// digest), so a given pair always sees the same perturbations.
struct PersonaParams {
  std::string label;
  double text_reliance = 0.0;
  FieldTriple visual_reliability{1.0, 1.0, 1.0};
  FieldTriple text_deference{0.0, 0.0, 0.0};
  double noise_sigma = 0.0;
  std::uint64_t persona_seed = 0;

  /// Throws ConfigError when any value is out of range.
  void validate() const;
  friend bool operator==(const PersonaParams&, const PersonaParams&) = default;
};

/// The perfectly grounded reference: no text reliance, exact vision, no noise.
PersonaParams ideal_persona();

/// Everything a persona needs for one pair that does not depend on the
/// tunable parameters. Calibration caches these and re-evaluates only the
/// kernel.
struct PersonaDraws {
  bool parseable = false;
  std::array<int, 3> claim{};      ///< claimed value per field
  std::array<int, 3> extracted{};  ///< -1 when indeterminate
  std::array<int, 3> wrong{};      ///< replacement used when the field is corrupted
  std::array<double, 3> corrupt_u{};
  double image_difficulty = 0.0;
  double noise_z = 0.0;
};

PersonaDraws persona_draws(const ExtractedAttributes& extracted, std::uint64_t image_digest,
                           std::string_view text, std::string_view pair_id,
                           std::uint64_t persona_seed);
double persona_kernel(const PersonaDraws& draws, const PersonaParams& params);

double persona_score(const Raster& image, std::string_view text, const PersonaParams& params,
                     std::string_view pair_id, const ExtractionConfig& config = {});
double oracle_score(const Raster& image, std::string_view text);

class PersonaScorer : public Scorer {
 public:
  explicit PersonaScorer(PersonaParams params, ExtractionConfig config = {});

  std::string name() const override;
  double score(const Raster& image, std::string_view text, std::string_view pair_id) override;
  /// Hashes and analyses each distinct raster of the batch once.
  std::vector<double> score_batch(std::span<const ScoreRequest> batch) override;

  const PersonaParams& params() const { return params_; }

 private:
  ExtractedAttributes extracted_for(const Raster& image, std::uint64_t digest);

  PersonaParams params_;
  ExtractionConfig config_;
  std::mutex mutex_;
  // Extraction is pure, so results are memoized by raster digest.
  std::unordered_map<std::uint64_t, ExtractedAttributes> extraction_cache_;
};

class OracleScorer : public PersonaScorer {
 public:
  OracleScorer() : PersonaScorer(ideal_persona()) {}
  std::string name() const override { return "oracle"; }
};

/// Ignores both inputs.
class ConstantScorer : public Scorer {
 public:
  explicit ConstantScorer(double value) : value_(value) {}
  std::string name() const override { return "constant"; }
  double score(const Raster&, std::string_view, std::string_view) override { return value_; }

 private:
  double value_;
};

}  // namespace xmodal
