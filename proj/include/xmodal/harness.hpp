#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "xmodal/scenegen.hpp"
#include "xmodal/scorers.hpp"
#include "xmodal/stats.hpp"
#include "xmodal/textlab.hpp"

namespace xmodal {

struct EvalConfig {
  double tau_lo = 0.0;
  double tau_hi = 1.0;
  double tau_step = 0.01;
  double z = 1.96;
  double alpha = 0.05;
  int negative_per_positive = 1;
  std::uint64_t master_seed = 42;

  /// Throws ConfigError.
  void validate() const;
  std::vector<double> tau_grid() const;
};

enum class Label : std::uint8_t { no_match, match };
enum class Provenance : std::uint8_t { matched, random_negative, adversarial, text_only, image_only };

struct ImageRef {
  enum class Kind : std::uint8_t { sample, noise } kind = Kind::sample;
  std::size_t sample_index = 0;
  std::uint64_t noise_seed = 0;

  friend bool operator==(const ImageRef&, const ImageRef&) = default;
};

struct Pair {
  std::string id;
  ImageRef image;
  std::string text;
  Label label = Label::match;
  Provenance provenance = Provenance::matched;
  std::optional<Strategy> strategy;
};

using PairSet = std::vector<Pair>;

enum class Phase : std::uint8_t { validation, normal, adversarial, text_only, image_only };

/// validation: matched pairs of the validation split, each followed by
///   negative_per_positive captions borrowed from other samples (redrawn until
///   shape, color or position differs);
/// normal: every sample with its own caption;
/// adversarial: every sample with its `strategy` variant, labeled no-match;
/// text_only: the normal pairs with each image swapped for a seeded noise image;
/// image_only: the normal pairs with every caption replaced by neutral_caption().
/// Throws ConfigError when an adversarial variant is missing.
PairSet build_pairs(const DatasetManifest& manifest,
                    const std::vector<AdversarialVariant>& variants, Phase phase,
                    const EvalConfig& config, Strategy strategy = Strategy::shape_swap);

/// Supplies rasters for image refs: stored PNGs under base_dir when present,
/// otherwise re-rendered specs; noise refs are generated.
class ImageSource {
 public:
  explicit ImageSource(const DatasetManifest& manifest, std::filesystem::path base_dir = {});
  Raster load(const ImageRef& ref) const;

 private:
  const DatasetManifest* manifest_;
  std::filesystem::path base_dir_;
};

/// Scores every pair; pairs are visited grouped by image so each raster is
/// loaded once, and results are returned in input order.
std::vector<double> score_pairs(Scorer& scorer, const PairSet& pairs, const ImageSource& images);

/// Grid point maximizing balanced accuracy of "match iff score > tau"; ties go
/// to the smallest tau. Throws StatsError when only one label is present.
double optimize_threshold(std::span<const double> scores, std::span<const Label> labels,
                          const EvalConfig& config);

struct PhaseResult {
  double accuracy = 0.0;
  long correct = 0;
  long n = 0;
  stats::Interval ci;
  std::vector<std::uint8_t> correctness;  ///< per pair, aligned with the pair set
};

PhaseResult phase_from_scores(std::span<const double> scores, std::span<const Label> labels,
                              double tau, double z);
PhaseResult run_phase(Scorer& scorer, const PairSet& pairs, double tau, const ImageSource& images,
                      double z = 1.96);

struct DropSummary {
  std::map<Strategy, double> drops;
  double average = 0.0;
};

DropSummary compute_drops(double normal_accuracy, const std::map<Strategy, double>& adversarial);

struct TdiResult {
  double text_only_accuracy = 0.0;
  double image_only_accuracy = 0.0;
  double tdi = 0.0;
};

TdiResult compute_tdi(Scorer& scorer, const PairSet& text_only, const PairSet& image_only,
                      double tau, const ImageSource& images);

/// Relative reduction in percent. Throws StatsError when the baseline is not
/// positive.
double compute_improvement(double baseline_avg_drop, double optimized_avg_drop);

struct StrategyResult {
  Strategy strategy = Strategy::shape_swap;
  PhaseResult phase;
  double drop = 0.0;
};

struct Comparison {
  std::string name;  ///< a strategy name or "pooled"
  stats::TestResult test;
  double p_adjusted = 1.0;
  bool degenerate = false;  ///< identical correctness vectors; no test possible
};

struct EvalReport {
  std::string model;
  double tau = 0.0;
  PhaseResult normal;
  std::vector<StrategyResult> strategies;
  PhaseResult adversarial;  ///< all adversarial pairs pooled, strategy-major
  double avg_drop = 0.0;
  TdiResult tdi;

  std::optional<std::string> reference_model;
  std::optional<double> improvement;
  std::vector<Comparison> comparisons;

  const StrategyResult* find(Strategy s) const;
};

EvalReport evaluate(Scorer& scorer, const DatasetManifest& manifest,
                    const std::vector<AdversarialVariant>& variants, const EvalConfig& config,
                    const ImageSource& images,
                    const std::vector<Strategy>& strategies = {kAllStrategies.begin(),
                                                               kAllStrategies.end()});

/// Paired t-tests of per-pair correctness (report minus reference) for each
/// shared strategy plus the pooled adversarial set, Holm-corrected as one
/// family, and the improvement in Avg Drop.
void attach_reference(EvalReport& report, const EvalReport& reference, double alpha);

/// Test of a against b over the pooled adversarial pairs.
Comparison compare_pooled(const EvalReport& a, const EvalReport& b);

inline constexpr int kReportSchemaVersion = 1;
nlohmann::ordered_json report_to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& doc);

}  // namespace xmodal
