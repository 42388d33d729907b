#include "xmodal/scorers.hpp"

#include <algorithm>
#include <cmath>

#include "xmodal/error.hpp"
#include "xmodal/seed.hpp"

namespace xmodal {
namespace {

constexpr std::array<int, 3> kFieldCardinality = {kShapeCount, kFgColorCount, kPositionCount};
constexpr std::array<std::string_view, 3> kCorruptTags = {"corrupt:shape", "corrupt:color",
                                                          "corrupt:position"};

void check_unit(double v, std::string_view what) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw ConfigError("persona: " + std::string(what) + " must lie in [0, 1]");
  }
}

}  // namespace

std::vector<double> Scorer::score_batch(std::span<const ScoreRequest> batch) {
  std::vector<double> out;
  out.reserve(batch.size());
  for (const auto& req : batch) out.push_back(score(*req.image, req.text, req.pair_id));
  return out;
}

void PersonaParams::validate() const {
  check_unit(text_reliance, "text_reliance");
  for (std::size_t f = 0; f < 3; ++f) {
    check_unit(visual_reliability[f], "visual_reliability");
    check_unit(text_deference[f], "text_deference");
  }
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    throw ConfigError("persona: noise_sigma must be a finite non-negative number");
  }
}

PersonaParams ideal_persona() {
  PersonaParams p;
  p.label = "oracle";
  return p;
}

PersonaDraws persona_draws(const ExtractedAttributes& extracted, std::uint64_t image_digest,
                           std::string_view text, std::string_view pair_id,
                           std::uint64_t persona_seed) {
  PersonaDraws d;
  const std::uint64_t pair_key = fnv1a64(pair_id);

  if (auto claim = try_parse_caption(text)) {
    d.parseable = true;
    d.claim = {int(claim->shape), int(claim->color), int(claim->position)};
  } else {
    Rng guess(derive_seed(persona_seed, pair_key, "guess"));
    for (std::size_t f = 0; f < 3; ++f) d.claim[f] = int(guess.index(kFieldCardinality[f]));
  }

  d.extracted = {extracted.shape ? int(*extracted.shape) : -1,
                 extracted.color ? int(*extracted.color) : -1,
                 extracted.position ? int(*extracted.position) : -1};

  for (std::size_t f = 0; f < 3; ++f) {
    Rng rng(derive_seed(persona_seed, pair_key, kCorruptTags[f]));
    d.corrupt_u[f] = rng.uniform();
    const int k = kFieldCardinality[f];
    const int other = int(rng.index(k - 1));
    d.wrong[f] = d.extracted[f] >= 0 && other >= d.extracted[f] ? other + 1 : other;
  }

  d.image_difficulty = Rng(derive_seed(persona_seed, image_digest, "difficulty")).uniform();
  d.noise_z = Rng(derive_seed(persona_seed, pair_key, "noise")).normal();
  return d;
}

double persona_kernel(const PersonaDraws& d, const PersonaParams& p) {
  double agree = 0.0;
  for (std::size_t f = 0; f < 3; ++f) {
    if (d.parseable && d.image_difficulty < p.text_deference[f]) {
      agree += 1.0;
    } else if (d.extracted[f] < 0) {
      agree += 1.0 / kFieldCardinality[f];
    } else {
      const bool corrupted = d.corrupt_u[f] < 1.0 - p.visual_reliability[f];
      const int seen = corrupted ? d.wrong[f] : d.extracted[f];
      agree += seen == d.claim[f] ? 1.0 : 0.0;
    }
  }
  const double v = agree / 3.0;
  const double t = d.parseable ? 1.0 : 0.0;
  const double s = (1.0 - p.text_reliance) * v + p.text_reliance * t + p.noise_sigma * d.noise_z;
  return std::clamp(s, 0.0, 1.0);
}

double persona_score(const Raster& image, std::string_view text, const PersonaParams& params,
                     std::string_view pair_id, const ExtractionConfig& config) {
  params.validate();
  const auto draws = persona_draws(extract_attributes(image, config), raster_digest(image), text,
                                   pair_id, params.persona_seed);
  return persona_kernel(draws, params);
}

double oracle_score(const Raster& image, std::string_view text) {
  return persona_score(image, text, ideal_persona(), "oracle");
}

PersonaScorer::PersonaScorer(PersonaParams params, ExtractionConfig config)
    : params_(std::move(params)), config_(config) {
  params_.validate();
}

std::string PersonaScorer::name() const { return "persona:" + params_.label; }

ExtractedAttributes PersonaScorer::extracted_for(const Raster& image, std::uint64_t digest) {
  {
    std::lock_guard lock(mutex_);
    auto it = extraction_cache_.find(digest);
    if (it != extraction_cache_.end()) return it->second;
  }
  ExtractedAttributes extracted = extract_attributes(image, config_);
  std::lock_guard lock(mutex_);
  extraction_cache_.emplace(digest, extracted);
  return extracted;
}

double PersonaScorer::score(const Raster& image, std::string_view text, std::string_view pair_id) {
  const std::uint64_t digest = raster_digest(image);
  return persona_kernel(
      persona_draws(extracted_for(image, digest), digest, text, pair_id, params_.persona_seed),
      params_);
}

std::vector<double> PersonaScorer::score_batch(std::span<const ScoreRequest> batch) {
  std::vector<double> out;
  out.reserve(batch.size());
  const Raster* last = nullptr;
  std::uint64_t digest = 0;
  ExtractedAttributes extracted;
  for (const auto& req : batch) {
    if (req.image != last) {
      last = req.image;
      digest = raster_digest(*req.image);
      extracted = extracted_for(*req.image, digest);
    }
    out.push_back(persona_kernel(
        persona_draws(extracted, digest, req.text, req.pair_id, params_.persona_seed), params_));
  }
  return out;
}

}  // namespace xmodal
