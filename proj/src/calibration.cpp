#include "xmodal/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "xmodal/error.hpp"
#include "xmodal/fs_util.hpp"
#include "xmodal/seed.hpp"

namespace xmodal {
namespace {

// Drops are differences of count ratios; comparing them against a tolerance
// needs a little room for rounding in the subtraction.
constexpr double kSlack = 1e-9;

double excess(double residual, double tol) {
  const double e = std::abs(residual) - tol - kSlack;
  return e > 0.0 ? e : 0.0;
}

double accuracy_of(const std::vector<double>& scores, const std::vector<Label>& labels,
                   double tau) {
  long correct = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    correct += (scores[i] > tau) == (labels[i] == Label::match);
  }
  return scores.empty() ? 0.0 : double(correct) / double(scores.size());
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%+.3f", v);
  return buf;
}

std::string fmt3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

// Parameter vector layout used by the search.
enum Coord { kLambda, kRhoS, kRhoC, kRhoP, kSigma, kDefS, kDefC, kDefP, kCoords };

PersonaParams to_params(const std::array<double, kCoords>& x, const PersonaParams& base) {
  PersonaParams p = base;
  p.text_reliance = x[kLambda];
  p.visual_reliability = {x[kRhoS], x[kRhoC], x[kRhoP]};
  p.noise_sigma = x[kSigma];
  p.text_deference = {x[kDefS], x[kDefC], x[kDefP]};
  return p;
}

constexpr double kMaxSigma = 0.5;

}  // namespace

std::vector<CalibrationTarget> targets_from_json(const nlohmann::json& doc) {
  try {
    const auto& models = doc.is_array() ? doc : doc.at("models");
    std::vector<CalibrationTarget> out;
    for (const auto& m : models) {
      CalibrationTarget t;
      t.label = m.at("label").get<std::string>();
      t.display_name = m.value("display_name", t.label);
      t.normal_accuracy = m.at("normal_accuracy").get<double>();
      double sum = 0.0;
      for (const auto& [key, value] : m.at("drops").items()) {
        auto s = strategy_from_name(key);
        if (!s) throw ConfigError("targets: unknown strategy '" + key + "'");
        t.drops[*s] = value.get<double>();
        sum += t.drops[*s];
      }
      if (t.drops.empty()) throw ConfigError("targets: '" + t.label + "' has no drops");
      t.avg_drop = m.contains("avg_drop") ? m.at("avg_drop").get<double>()
                                          : sum / double(t.drops.size());
      if (!(t.normal_accuracy >= 0.0 && t.normal_accuracy <= 1.0)) {
        throw ConfigError("targets: normal_accuracy must lie in [0, 1]");
      }
      out.push_back(std::move(t));
    }
    if (out.empty()) throw ConfigError("targets: no models");
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("targets: ") + e.what());
  }
}

nlohmann::ordered_json targets_to_json(const std::vector<CalibrationTarget>& targets) {
  nlohmann::ordered_json doc;
  doc["schema"] = "xmodal.calibration_targets";
  doc["version"] = 1;
  auto models = nlohmann::ordered_json::array();
  for (const auto& t : targets) {
    nlohmann::ordered_json m;
    m["label"] = t.label;
    m["display_name"] = t.display_name;
    m["normal_accuracy"] = t.normal_accuracy;
    m["avg_drop"] = t.avg_drop;
    nlohmann::ordered_json drops;
    for (const auto& [s, v] : t.drops) drops[std::string(name(s))] = v;
    m["drops"] = std::move(drops);
    models.push_back(std::move(m));
  }
  doc["models"] = std::move(models);
  return doc;
}

std::vector<CalibrationTarget> read_targets(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw ConfigError("targets file not found: " + path.string());
  }
  try {
    return targets_from_json(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("targets file " + path.string() + ": " + e.what());
  }
}

std::vector<SampleEvidence> collect_evidence(const DatasetManifest& manifest,
                                             const ImageSource& images,
                                             const ExtractionConfig& config) {
  std::vector<SampleEvidence> out;
  out.reserve(manifest.samples.size());
  for (std::size_t i = 0; i < manifest.samples.size(); ++i) {
    const Raster r = images.load({ImageRef::Kind::sample, i, 0});
    out.push_back({extract_attributes(r, config), raster_digest(r)});
  }
  return out;
}

PersonaSimulator::PersonaSimulator(const DatasetManifest& manifest,
                                   const std::vector<AdversarialVariant>& variants,
                                   const EvalConfig& config,
                                   const std::vector<SampleEvidence>& evidence,
                                   std::uint64_t persona_seed,
                                   const std::vector<Strategy>& strategies)
    : config_(config), persona_seed_(persona_seed), strategies_(strategies) {
  config_.validate();
  if (evidence.size() != manifest.samples.size()) {
    throw ConfigError("simulator: evidence does not cover the manifest");
  }
  auto load = [&](const PairSet& pairs) {
    Phase phase;
    phase.draws.reserve(pairs.size());
    for (const auto& p : pairs) {
      if (p.image.kind != ImageRef::Kind::sample) {
        throw ConfigError("simulator: only sample images are supported");
      }
      const auto& ev = evidence[p.image.sample_index];
      phase.draws.push_back(persona_draws(ev.extracted, ev.digest, p.text, p.id, persona_seed));
      phase.labels.push_back(p.label);
    }
    return phase;
  };
  validation_ = load(build_pairs(manifest, variants, xmodal::Phase::validation, config_));
  normal_ = load(build_pairs(manifest, variants, xmodal::Phase::normal, config_));
  for (Strategy s : strategies_) {
    adversarial_.push_back(
        load(build_pairs(manifest, variants, xmodal::Phase::adversarial, config_, s)));
  }
}

SimulatedMetrics PersonaSimulator::run(const PersonaParams& params) const {
  auto scores_of = [&](const Phase& phase) {
    std::vector<double> s(phase.draws.size());
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = persona_kernel(phase.draws[i], params);
    return s;
  };
  SimulatedMetrics m;
  m.tau = optimize_threshold(scores_of(validation_), validation_.labels, config_);
  m.normal_accuracy = accuracy_of(scores_of(normal_), normal_.labels, m.tau);
  for (std::size_t k = 0; k < strategies_.size(); ++k) {
    m.adversarial_accuracy[strategies_[k]] =
        accuracy_of(scores_of(adversarial_[k]), adversarial_[k].labels, m.tau);
  }
  const auto drops = compute_drops(m.normal_accuracy, m.adversarial_accuracy);
  m.drops = drops.drops;
  m.avg_drop = drops.average;
  return m;
}

std::uint64_t persona_seed_for(std::uint64_t master_seed, std::string_view label) {
  return derive_seed(master_seed, fnv1a64(label), "persona");
}

double calibration_objective(const SimulatedMetrics& m, const CalibrationTarget& target,
                             const CalibrationTolerance& tol) {
  double sse = 0.0;
  double over = 0.0;
  for (const auto& [s, want] : target.drops) {
    const auto it = m.drops.find(s);
    const double e = (it == m.drops.end() ? 0.0 : it->second) - want;
    sse += e * e;
    over += excess(e, tol.drop) * excess(e, tol.drop);
  }
  const double ea = m.avg_drop - target.avg_drop;
  sse += ea * ea;
  over += excess(ea, tol.avg_drop) * excess(ea, tol.avg_drop);
  double f = sse + 100.0 * over;
  const double en = excess(m.normal_accuracy - target.normal_accuracy, tol.normal_accuracy);
  if (en > 0.0) f += 1.0 + en;
  return f;
}

bool within_tolerance(const SimulatedMetrics& m, const CalibrationTarget& target,
                      const CalibrationTolerance& tol) {
  for (const auto& [s, want] : target.drops) {
    const auto it = m.drops.find(s);
    if (it == m.drops.end() || excess(it->second - want, tol.drop) > 0.0) return false;
  }
  return excess(m.avg_drop - target.avg_drop, tol.avg_drop) == 0.0 &&
         excess(m.normal_accuracy - target.normal_accuracy, tol.normal_accuracy) == 0.0;
}

CalibrationResult calibrate_persona(const PersonaSimulator& sim, const CalibrationTarget& target,
                                    const CalibrationTolerance& tol,
                                    const SearchOptions& options) {
  PersonaParams base;
  base.label = target.label;
  base.persona_seed = sim.persona_seed();

  CalibrationResult result;
  result.target = target;
  int evaluations = 0;
  auto evaluate_at = [&](const std::array<double, kCoords>& x, SimulatedMetrics& out) {
    ++evaluations;
    out = sim.run(to_params(x, base));
    return calibration_objective(out, target, tol);
  };

  std::array<double, kCoords> best{};
  best[kSigma] = options.grid_sigma;
  const double missed = 1.0 - target.normal_accuracy;
  const std::array<Strategy, 3> swaps = {Strategy::shape_swap, Strategy::color_swap,
                                         Strategy::position_swap};
  for (int f = 0; f < 3; ++f) {
    const auto it = target.drops.find(swaps[f]);
    const double d = (it == target.drops.end() ? target.avg_drop : it->second) + missed;
    best[kDefS + f] = std::clamp(d, 0.0, 1.0);
  }

  SimulatedMetrics best_metrics;
  double best_f = std::numeric_limits<double>::infinity();
  const int n_lambda = int(std::lround(1.0 / options.lambda_step));
  const int n_rho = int(std::lround((1.0 - options.rho_lo) / options.rho_step));
  std::array<double, kCoords> x = best;
  SimulatedMetrics m;
  for (int li = 0; li <= n_lambda; ++li) {
    x[kLambda] = li * options.lambda_step;
    for (int a = 0; a <= n_rho; ++a) {
      x[kRhoS] = options.rho_lo + a * options.rho_step;
      for (int b = 0; b <= n_rho; ++b) {
        x[kRhoC] = options.rho_lo + b * options.rho_step;
        for (int c = 0; c <= n_rho; ++c) {
          x[kRhoP] = options.rho_lo + c * options.rho_step;
          const double f = evaluate_at(x, m);
          if (f < best_f) {
            best_f = f;
            best = x;
            best_metrics = m;
          }
        }
      }
    }
  }

  struct Point {
    std::array<double, kCoords> x;
    double f;
    SimulatedMetrics metrics;
  };
  std::vector<Point> starts = {{best, best_f, best_metrics}};

  // Closed-form starts for a persona that only defers: with no text reliance
  // and no noise, Drop_f is about d_f minus the normal-phase misses, and the
  // misses come from corruption, spread evenly or put on a single field.
  std::array<double, kCoords> analytic = best;
  analytic[kLambda] = 0.0;
  analytic[kSigma] = 0.0;
  const double n_star = std::clamp(target.normal_accuracy, 0.0, 1.0);
  for (int spread = -1; spread < 3; ++spread) {
    for (int f = 0; f < 3; ++f) {
      analytic[kRhoS + f] = spread < 0 ? std::cbrt(n_star) : spread == f ? n_star : 1.0;
    }
    const double f = evaluate_at(analytic, m);
    starts.push_back({analytic, f, m});
  }

  // Coordinate descent taking the best single move per sweep; the step halves
  // when a sweep finds nothing and resets once the finest scale is exhausted
  // if that round made progress.
  auto refine = [&](Point p) {
    std::array<double, kCoords> step;
    step.fill(options.refine_step);
    step[kSigma] = options.refine_sigma_step;
    int refine_evals = 0;
    bool round_improved = false;
    while (refine_evals < options.max_refine_evaluations) {
      Point sweep = p;
      for (int k = 0; k < kCoords && refine_evals < options.max_refine_evaluations; ++k) {
        const double hi = k == kSigma ? kMaxSigma : 1.0;
        for (double dir : {1.0, -1.0}) {
          if (refine_evals >= options.max_refine_evaluations) break;
          x = p.x;
          x[k] = std::clamp(p.x[k] + dir * step[k], 0.0, hi);
          if (x[k] == p.x[k]) continue;
          ++refine_evals;
          const double f = evaluate_at(x, m);
          if (f < sweep.f) sweep = {x, f, m};
        }
      }
      if (sweep.f < p.f) {
        p = std::move(sweep);
        round_improved = true;
        continue;
      }
      for (double& s : step) s *= 0.5;
      if (*std::max_element(step.begin(), step.end()) < options.min_step) {
        if (!round_improved) break;
        round_improved = false;
        step.fill(options.refine_step);
        step[kSigma] = options.refine_sigma_step;
      }
    }
    return p;
  };

  Point winner{best, std::numeric_limits<double>::infinity(), {}};
  for (const auto& start : starts) {
    Point p = refine(start);
    if (p.f < winner.f) winner = std::move(p);
  }
  best = winner.x;
  best_f = winner.f;
  best_metrics = winner.metrics;

  result.params = to_params(best, base);
  result.metrics = best_metrics;
  result.objective = best_f;
  result.evaluations = evaluations;
  for (const auto& [s, want] : target.drops) {
    result.drop_residuals[s] = best_metrics.drops[s] - want;
  }
  result.avg_drop_residual = best_metrics.avg_drop - target.avg_drop;
  result.normal_residual = best_metrics.normal_accuracy - target.normal_accuracy;
  result.within_tolerance = within_tolerance(best_metrics, target, tol);
  return result;
}

std::vector<CalibrationResult> calibrate_personas(
    const DatasetManifest& manifest, const std::vector<AdversarialVariant>& variants,
    const std::vector<CalibrationTarget>& targets, const EvalConfig& config,
    const ImageSource& images, const CalibrationTolerance& tol, const SearchOptions& options) {
  const auto evidence = collect_evidence(manifest, images);
  std::vector<Strategy> strategies;
  for (Strategy s : kAllStrategies) {
    if (targets.front().drops.count(s)) strategies.push_back(s);
  }
  std::vector<CalibrationResult> out;
  for (const auto& t : targets) {
    PersonaSimulator sim(manifest, variants, config, evidence,
                         persona_seed_for(config.master_seed, t.label), strategies);
    out.push_back(calibrate_persona(sim, t, tol, options));
  }
  return out;
}

nlohmann::ordered_json persona_to_json(const PersonaParams& p) {
  auto triple = [](const FieldTriple& t) {
    nlohmann::ordered_json j;
    j["shape"] = t.shape;
    j["color"] = t.color;
    j["position"] = t.position;
    return j;
  };
  nlohmann::ordered_json j;
  j["label"] = p.label;
  j["text_reliance"] = p.text_reliance;
  j["visual_reliability"] = triple(p.visual_reliability);
  j["text_deference"] = triple(p.text_deference);
  j["noise_sigma"] = p.noise_sigma;
  j["persona_seed"] = p.persona_seed;
  return j;
}

PersonaParams persona_from_json(const nlohmann::json& j) {
  auto triple = [](const nlohmann::json& t) {
    return FieldTriple{t.at("shape").get<double>(), t.at("color").get<double>(),
                       t.at("position").get<double>()};
  };
  try {
    PersonaParams p;
    p.label = j.at("label").get<std::string>();
    p.text_reliance = j.at("text_reliance").get<double>();
    p.visual_reliability = triple(j.at("visual_reliability"));
    if (j.contains("text_deference")) p.text_deference = triple(j.at("text_deference"));
    p.noise_sigma = j.at("noise_sigma").get<double>();
    p.persona_seed = j.at("persona_seed").get<std::uint64_t>();
    p.validate();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("persona: ") + e.what());
  }
}

nlohmann::ordered_json personas_to_json(const std::vector<CalibrationResult>& results,
                                        std::uint64_t master_seed) {
  nlohmann::ordered_json doc;
  doc["schema"] = "xmodal.personas";
  doc["version"] = kPersonasSchemaVersion;
  doc["master_seed"] = master_seed;
  auto arr = nlohmann::ordered_json::array();
  for (const auto& r : results) {
    auto j = persona_to_json(r.params);
    nlohmann::ordered_json fit;
    fit["tau"] = r.metrics.tau;
    fit["normal_accuracy"] = r.metrics.normal_accuracy;
    nlohmann::ordered_json drops, residuals;
    for (const auto& [s, v] : r.metrics.drops) drops[std::string(name(s))] = v;
    for (const auto& [s, v] : r.drop_residuals) residuals[std::string(name(s))] = v;
    fit["drops"] = std::move(drops);
    fit["avg_drop"] = r.metrics.avg_drop;
    fit["drop_residuals"] = std::move(residuals);
    fit["avg_drop_residual"] = r.avg_drop_residual;
    fit["normal_residual"] = r.normal_residual;
    fit["objective"] = r.objective;
    fit["evaluations"] = r.evaluations;
    fit["within_tolerance"] = r.within_tolerance;
    j["fit"] = std::move(fit);
    arr.push_back(std::move(j));
  }
  doc["personas"] = std::move(arr);
  return doc;
}

std::vector<PersonaParams> personas_from_json(const nlohmann::json& doc) {
  try {
    std::vector<PersonaParams> out;
    for (const auto& j : doc.at("personas")) out.push_back(persona_from_json(j));
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("personas: ") + e.what());
  }
}

std::vector<PersonaParams> read_personas(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw ConfigError("personas file not found: " + path.string());
  }
  try {
    return personas_from_json(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("personas file " + path.string() + ": " + e.what());
  }
}

std::string residual_report(const std::vector<CalibrationResult>& results) {
  std::ostringstream os;
  for (const auto& r : results) {
    os << r.target.label << (r.within_tolerance ? " (within tolerance)" : " (OUT OF TOLERANCE)")
       << " objective=" << r.objective << " evaluations=" << r.evaluations << "\n";
    os << "  normal_accuracy  sim=" << fmt3(r.metrics.normal_accuracy)
       << " target=" << fmt3(r.target.normal_accuracy) << " residual=" << fmt(r.normal_residual)
       << "\n";
    for (const auto& [s, res] : r.drop_residuals) {
      os << "  " << name(s) << "  sim=" << fmt3(r.metrics.drops.at(s))
         << " target=" << fmt3(r.target.drops.at(s)) << " residual=" << fmt(res) << "\n";
    }
    os << "  avg_drop  sim=" << fmt3(r.metrics.avg_drop) << " target=" << fmt3(r.target.avg_drop)
       << " residual=" << fmt(r.avg_drop_residual) << "\n";
  }
  return os.str();
}

}  // namespace xmodal
