#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "xmodal/harness.hpp"
#include "xmodal/scorers.hpp"

namespace xmodal {

/// What one persona should reproduce.
struct CalibrationTarget {
  std::string label;
  std::string display_name;
  double normal_accuracy = 1.0;
  std::map<Strategy, double> drops;
  double avg_drop = 0.0;  ///< defaults to the mean of drops when absent from JSON
};

struct CalibrationTolerance {
  double drop = 0.02;
  double avg_drop = 0.01;
  double normal_accuracy = 0.01;
};

struct SearchOptions {
  double lambda_step = 0.05;
  double rho_lo = 0.5;
  double rho_step = 0.05;
  double grid_sigma = 0.05;
  double refine_step = 0.05;
  double refine_sigma_step = 0.02;
  double min_step = 1e-4;
  int max_refine_evaluations = 500;  ///< per start
};

std::vector<CalibrationTarget> targets_from_json(const nlohmann::json& doc);
nlohmann::ordered_json targets_to_json(const std::vector<CalibrationTarget>& targets);
std::vector<CalibrationTarget> read_targets(const std::filesystem::path& path);

/// Pixel-derived facts about one image, computed once per dataset.
struct SampleEvidence {
  ExtractedAttributes extracted;
  std::uint64_t digest = 0;
};

std::vector<SampleEvidence> collect_evidence(const DatasetManifest& manifest,
                                             const ImageSource& images,
                                             const ExtractionConfig& config = {});

struct SimulatedMetrics {
  double tau = 0.0;
  double normal_accuracy = 0.0;
  std::map<Strategy, double> adversarial_accuracy;
  std::map<Strategy, double> drops;
  double avg_drop = 0.0;
};

/// Replays the validation, normal and adversarial phases of evaluate() for a
/// persona with a fixed seed. All parameter-independent draws are cached, so
/// a run costs only the kernel arithmetic. Results are identical to
/// evaluate() with a PersonaScorer of the same seed.
class PersonaSimulator {
 public:
  PersonaSimulator(const DatasetManifest& manifest,
                   const std::vector<AdversarialVariant>& variants, const EvalConfig& config,
                   const std::vector<SampleEvidence>& evidence, std::uint64_t persona_seed,
                   const std::vector<Strategy>& strategies = {kAllStrategies.begin(),
                                                              kAllStrategies.end()});

  SimulatedMetrics run(const PersonaParams& params) const;
  std::uint64_t persona_seed() const { return persona_seed_; }

 private:
  struct Phase {
    std::vector<PersonaDraws> draws;
    std::vector<Label> labels;
  };
  EvalConfig config_;
  std::uint64_t persona_seed_;
  std::vector<Strategy> strategies_;
  Phase validation_;
  Phase normal_;
  std::vector<Phase> adversarial_;
};

std::uint64_t persona_seed_for(std::uint64_t master_seed, std::string_view label);

struct CalibrationResult {
  CalibrationTarget target;
  PersonaParams params;
  SimulatedMetrics metrics;
  std::map<Strategy, double> drop_residuals;  ///< simulated minus target
  double avg_drop_residual = 0.0;
  double normal_residual = 0.0;
  double objective = 0.0;
  int evaluations = 0;
  bool within_tolerance = false;
};

/// Squared drop error plus squared average error, with a steep penalty for
/// every quantity outside its tolerance band.
double calibration_objective(const SimulatedMetrics& m, const CalibrationTarget& target,
                             const CalibrationTolerance& tol);

bool within_tolerance(const SimulatedMetrics& m, const CalibrationTarget& target,
                      const CalibrationTolerance& tol);

/// Coarse grid over (text_reliance, visual_reliability) with sigma frozen and
/// deference set from the target drops. Coordinate descent over all eight
/// parameters with a halving step then runs from the grid winner and from four
/// closed-form starts (no text reliance, no noise, normal-phase misses spread
/// over the fields or put on one field); the best refined point wins.
CalibrationResult calibrate_persona(const PersonaSimulator& sim, const CalibrationTarget& target,
                                    const CalibrationTolerance& tol = {},
                                    const SearchOptions& options = {});

std::vector<CalibrationResult> calibrate_personas(
    const DatasetManifest& manifest, const std::vector<AdversarialVariant>& variants,
    const std::vector<CalibrationTarget>& targets, const EvalConfig& config,
    const ImageSource& images, const CalibrationTolerance& tol = {},
    const SearchOptions& options = {});

inline constexpr int kPersonasSchemaVersion = 1;
nlohmann::ordered_json personas_to_json(const std::vector<CalibrationResult>& results,
                                        std::uint64_t master_seed);
nlohmann::ordered_json persona_to_json(const PersonaParams& p);
PersonaParams persona_from_json(const nlohmann::json& j);
/// Reads the personas array of a personas file.
std::vector<PersonaParams> personas_from_json(const nlohmann::json& doc);
std::vector<PersonaParams> read_personas(const std::filesystem::path& path);

/// Human-readable residual table, one line per quantity.
std::string residual_report(const std::vector<CalibrationResult>& results);

}  // namespace xmodal
