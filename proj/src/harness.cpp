#include "xmodal/harness.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

#include "xmodal/dataset_io.hpp"
#include "xmodal/error.hpp"
#include "xmodal/seed.hpp"

namespace xmodal {
namespace {

bool same_visual_claim(const SceneSpec& a, const SceneSpec& b) {
  return a.shape == b.shape && a.color == b.color && a.position == b.position;
}

const AdversarialVariant* find_variant(const std::vector<AdversarialVariant>& variants,
                                       const std::string& sample_id, Strategy strategy) {
  for (const auto& v : variants) {
    if (v.sample_id == sample_id && v.strategy == strategy) return &v;
  }
  return nullptr;
}

std::string encode_bits(const std::vector<std::uint8_t>& bits) {
  std::string out(bits.size(), '0');
  for (std::size_t i = 0; i < bits.size(); ++i) out[i] = bits[i] ? '1' : '0';
  return out;
}

std::vector<std::uint8_t> decode_bits(const std::string& s) {
  std::vector<std::uint8_t> out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = s[i] == '1' ? 1 : 0;
  return out;
}

nlohmann::ordered_json phase_json(const PhaseResult& p) {
  nlohmann::ordered_json j;
  j["accuracy"] = p.accuracy;
  j["correct"] = p.correct;
  j["n"] = p.n;
  j["ci"] = {p.ci.lo, p.ci.hi};
  return j;
}

PhaseResult phase_from_json(const nlohmann::json& j) {
  PhaseResult p;
  p.accuracy = j.at("accuracy").get<double>();
  p.correct = j.at("correct").get<long>();
  p.n = j.at("n").get<long>();
  p.ci = {j.at("ci").at(0).get<double>(), j.at("ci").at(1).get<double>()};
  return p;
}

Comparison paired_comparison(std::string name, const std::vector<std::uint8_t>& a,
                             const std::vector<std::uint8_t>& b) {
  if (a.size() != b.size()) {
    throw ConfigError("comparison '" + name + "': correctness vectors are not aligned");
  }
  std::vector<double> diffs(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) diffs[i] = double(a[i]) - double(b[i]);
  Comparison c;
  c.name = std::move(name);
  try {
    c.test = stats::paired_t_test(diffs);
  } catch (const StatsError&) {
    c.degenerate = true;
    c.test.mean_diff = diffs.empty() ? 0.0 : stats::mean(diffs);
    c.test.dof = static_cast<long>(diffs.size()) - 1;
  }
  return c;
}

}  // namespace

void EvalConfig::validate() const {
  if (!(tau_step > 0.0)) throw ConfigError("tau_step must be positive");
  if (!(tau_hi >= tau_lo)) throw ConfigError("tau grid is empty");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  if (!(z > 0.0)) throw ConfigError("z must be positive");
  if (negative_per_positive < 1) throw ConfigError("negative_per_positive must be >= 1");
}

std::vector<double> EvalConfig::tau_grid() const {
  const long steps = std::lround((tau_hi - tau_lo) / tau_step);
  std::vector<double> grid;
  grid.reserve(steps + 1);
  for (long k = 0; k <= steps; ++k) grid.push_back(tau_lo + double(k) * tau_step);
  return grid;
}

PairSet build_pairs(const DatasetManifest& manifest,
                    const std::vector<AdversarialVariant>& variants, Phase phase,
                    const EvalConfig& config, Strategy strategy) {
  const auto& samples = manifest.samples;
  PairSet out;
  switch (phase) {
    case Phase::validation: {
      for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].split != Split::validation) continue;
        out.push_back({"val/" + samples[i].id + "/pos", {ImageRef::Kind::sample, i, 0},
                       samples[i].caption, Label::match, Provenance::matched, std::nullopt});
        if (samples.size() < 2) continue;
        Rng rng(derive_seed(config.master_seed, i, "negative"));
        for (int k = 0; k < config.negative_per_positive; ++k) {
          std::size_t j = i;
          // Bounded redraw; a manifest of identical scenes has no valid negative.
          for (int attempt = 0; attempt < 10000; ++attempt) {
            j = rng.index(samples.size());
            if (j != i && !same_visual_claim(samples[i].spec, samples[j].spec)) break;
            j = i;
          }
          if (j == i) continue;
          out.push_back({"val/" + samples[i].id + "/neg" + std::to_string(k),
                         {ImageRef::Kind::sample, i, 0}, samples[j].caption, Label::no_match,
                         Provenance::random_negative, std::nullopt});
        }
      }
      break;
    }
    case Phase::normal:
      for (std::size_t i = 0; i < samples.size(); ++i) {
        out.push_back({"normal/" + samples[i].id, {ImageRef::Kind::sample, i, 0},
                       samples[i].caption, Label::match, Provenance::matched, std::nullopt});
      }
      break;
    case Phase::adversarial:
      for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto* v = find_variant(variants, samples[i].id, strategy);
        if (!v) {
          throw ConfigError("no " + std::string(name(strategy)) + " variant for sample " +
                            samples[i].id);
        }
        out.push_back({"adv/" + std::string(name(strategy)) + "/" + samples[i].id,
                       {ImageRef::Kind::sample, i, 0}, v->caption, Label::no_match,
                       Provenance::adversarial, strategy});
      }
      break;
    case Phase::text_only:
      for (std::size_t i = 0; i < samples.size(); ++i) {
        out.push_back({"text_only/" + samples[i].id,
                       {ImageRef::Kind::noise, i, derive_seed(config.master_seed, i, "text-only")},
                       samples[i].caption, Label::match, Provenance::text_only, std::nullopt});
      }
      break;
    case Phase::image_only:
      for (std::size_t i = 0; i < samples.size(); ++i) {
        out.push_back({"image_only/" + samples[i].id, {ImageRef::Kind::sample, i, 0},
                       std::string(neutral_caption()), Label::match, Provenance::image_only,
                       std::nullopt});
      }
      break;
  }
  return out;
}

ImageSource::ImageSource(const DatasetManifest& manifest, std::filesystem::path base_dir)
    : manifest_(&manifest), base_dir_(std::move(base_dir)) {}

Raster ImageSource::load(const ImageRef& ref) const {
  if (ref.kind == ImageRef::Kind::noise) return render_noise_image(ref.noise_seed);
  return load_sample_image(manifest_->samples.at(ref.sample_index), base_dir_);
}

std::vector<double> score_pairs(Scorer& scorer, const PairSet& pairs, const ImageSource& images) {
  constexpr std::size_t kChunk = 64;
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  auto key = [&](std::size_t i) {
    const auto& r = pairs[i].image;
    return std::tuple(int(r.kind), r.sample_index, r.noise_seed);
  };
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return key(a) < key(b); });

  std::vector<double> scores(pairs.size());
  std::optional<ImageRef> cached_ref;
  Raster cached;
  for (std::size_t start = 0; start < order.size(); start += kChunk) {
    const std::size_t end = std::min(order.size(), start + kChunk);
    std::deque<Raster> held;  // stable addresses for this chunk
    std::vector<ScoreRequest> batch;
    batch.reserve(end - start);
    for (std::size_t k = start; k < end; ++k) {
      const Pair& p = pairs[order[k]];
      if (!cached_ref || !(*cached_ref == p.image)) {
        cached = images.load(p.image);
        cached_ref = p.image;
        held.push_back(cached);
      } else if (held.empty()) {
        held.push_back(cached);
      }
      batch.push_back({p.id, &held.back(), p.text});
    }
    const auto chunk_scores = scorer.score_batch(batch);
    if (chunk_scores.size() != batch.size()) {
      throw std::runtime_error("scorer returned " + std::to_string(chunk_scores.size()) +
                               " scores for " + std::to_string(batch.size()) + " pairs");
    }
    for (std::size_t k = start; k < end; ++k) scores[order[k]] = chunk_scores[k - start];
  }
  return scores;
}

double optimize_threshold(std::span<const double> scores, std::span<const Label> labels,
                          const EvalConfig& config) {
  long positives = 0;
  for (Label l : labels) positives += l == Label::match;
  const long negatives = static_cast<long>(labels.size()) - positives;
  if (positives == 0 || negatives == 0) {
    throw StatsError("optimize_threshold: both labels must be present");
  }
  double best_tau = config.tau_lo;
  double best_ba = -1.0;
  for (double tau : config.tau_grid()) {
    long tp = 0, tn = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const bool predicted = scores[i] > tau;
      if (labels[i] == Label::match) tp += predicted;
      else tn += !predicted;
    }
    const double ba = 0.5 * (double(tp) / positives + double(tn) / negatives);
    if (ba > best_ba) {
      best_ba = ba;
      best_tau = tau;
    }
  }
  return best_tau;
}

PhaseResult phase_from_scores(std::span<const double> scores, std::span<const Label> labels,
                              double tau, double z) {
  PhaseResult r;
  r.n = static_cast<long>(scores.size());
  r.correctness.resize(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted_match = scores[i] > tau;
    const bool ok = predicted_match == (labels[i] == Label::match);
    r.correctness[i] = ok;
    r.correct += ok;
  }
  if (r.n > 0) {
    r.accuracy = double(r.correct) / double(r.n);
    r.ci = stats::wilson_ci(r.correct, r.n, z);
  }
  return r;
}

PhaseResult run_phase(Scorer& scorer, const PairSet& pairs, double tau, const ImageSource& images,
                      double z) {
  const auto scores = score_pairs(scorer, pairs, images);
  std::vector<Label> labels;
  labels.reserve(pairs.size());
  for (const auto& p : pairs) labels.push_back(p.label);
  return phase_from_scores(scores, labels, tau, z);
}

DropSummary compute_drops(double normal_accuracy, const std::map<Strategy, double>& adversarial) {
  DropSummary out;
  double sum = 0.0;
  for (const auto& [s, acc] : adversarial) {
    out.drops[s] = normal_accuracy - acc;
    sum += out.drops[s];
  }
  if (!adversarial.empty()) out.average = sum / double(adversarial.size());
  return out;
}

TdiResult compute_tdi(Scorer& scorer, const PairSet& text_only, const PairSet& image_only,
                      double tau, const ImageSource& images) {
  TdiResult r;
  r.text_only_accuracy = run_phase(scorer, text_only, tau, images).accuracy;
  r.image_only_accuracy = run_phase(scorer, image_only, tau, images).accuracy;
  r.tdi = r.text_only_accuracy - r.image_only_accuracy;
  return r;
}

double compute_improvement(double baseline_avg_drop, double optimized_avg_drop) {
  if (!(baseline_avg_drop > 0.0)) {
    throw StatsError("improvement is undefined for a non-positive baseline drop");
  }
  return (baseline_avg_drop - optimized_avg_drop) / baseline_avg_drop * 100.0;
}

const StrategyResult* EvalReport::find(Strategy s) const {
  for (const auto& r : strategies) {
    if (r.strategy == s) return &r;
  }
  return nullptr;
}

EvalReport evaluate(Scorer& scorer, const DatasetManifest& manifest,
                    const std::vector<AdversarialVariant>& variants, const EvalConfig& config,
                    const ImageSource& images, const std::vector<Strategy>& strategies) {
  config.validate();
  // Everything is scored in one pass so each image is loaded once; scores do
  // not depend on tau.
  std::vector<PairSet> sets;
  sets.push_back(build_pairs(manifest, variants, Phase::validation, config));
  sets.push_back(build_pairs(manifest, variants, Phase::normal, config));
  for (Strategy s : strategies) {
    sets.push_back(build_pairs(manifest, variants, Phase::adversarial, config, s));
  }
  sets.push_back(build_pairs(manifest, variants, Phase::text_only, config));
  sets.push_back(build_pairs(manifest, variants, Phase::image_only, config));

  PairSet all;
  for (const auto& set : sets) all.insert(all.end(), set.begin(), set.end());
  const auto scores = score_pairs(scorer, all, images);

  std::vector<std::vector<double>> set_scores;
  std::vector<std::vector<Label>> set_labels;
  std::size_t offset = 0;
  for (const auto& set : sets) {
    set_scores.emplace_back(scores.begin() + offset, scores.begin() + offset + set.size());
    std::vector<Label> labels;
    for (const auto& p : set) labels.push_back(p.label);
    set_labels.push_back(std::move(labels));
    offset += set.size();
  }

  EvalReport report;
  report.model = scorer.name();
  report.tau = optimize_threshold(set_scores[0], set_labels[0], config);
  report.normal = phase_from_scores(set_scores[1], set_labels[1], report.tau, config.z);

  std::map<Strategy, double> adv_acc;
  std::vector<double> pooled_scores;
  std::vector<Label> pooled_labels;
  for (std::size_t k = 0; k < strategies.size(); ++k) {
    StrategyResult sr;
    sr.strategy = strategies[k];
    sr.phase = phase_from_scores(set_scores[2 + k], set_labels[2 + k], report.tau, config.z);
    adv_acc[sr.strategy] = sr.phase.accuracy;
    pooled_scores.insert(pooled_scores.end(), set_scores[2 + k].begin(), set_scores[2 + k].end());
    pooled_labels.insert(pooled_labels.end(), set_labels[2 + k].begin(), set_labels[2 + k].end());
    report.strategies.push_back(std::move(sr));
  }
  report.adversarial = phase_from_scores(pooled_scores, pooled_labels, report.tau, config.z);

  const auto drops = compute_drops(report.normal.accuracy, adv_acc);
  for (auto& sr : report.strategies) sr.drop = drops.drops.at(sr.strategy);
  report.avg_drop = drops.average;

  const std::size_t t_idx = 2 + strategies.size();
  report.tdi.text_only_accuracy =
      phase_from_scores(set_scores[t_idx], set_labels[t_idx], report.tau, config.z).accuracy;
  report.tdi.image_only_accuracy =
      phase_from_scores(set_scores[t_idx + 1], set_labels[t_idx + 1], report.tau, config.z)
          .accuracy;
  report.tdi.tdi = report.tdi.text_only_accuracy - report.tdi.image_only_accuracy;
  return report;
}

Comparison compare_pooled(const EvalReport& a, const EvalReport& b) {
  return paired_comparison("pooled", a.adversarial.correctness, b.adversarial.correctness);
}

void attach_reference(EvalReport& report, const EvalReport& reference, double alpha) {
  report.reference_model = reference.model;
  report.comparisons.clear();
  for (const auto& sr : report.strategies) {
    if (const auto* ref = reference.find(sr.strategy)) {
      report.comparisons.push_back(paired_comparison(std::string(name(sr.strategy)),
                                                     sr.phase.correctness,
                                                     ref->phase.correctness));
    }
  }
  if (report.adversarial.correctness.size() == reference.adversarial.correctness.size()) {
    report.comparisons.push_back(compare_pooled(report, reference));
  }
  std::vector<double> p;
  for (const auto& c : report.comparisons) p.push_back(c.degenerate ? 1.0 : c.test.p_value);
  const auto adjusted = stats::holm_adjusted(p);
  const auto reject = stats::holm_bonferroni(p, alpha);
  for (std::size_t i = 0; i < report.comparisons.size(); ++i) {
    report.comparisons[i].p_adjusted = adjusted[i];
    report.comparisons[i].test.adjusted_reject = reject[i];
  }
  report.improvement.reset();
  if (reference.avg_drop > 0.0) {
    report.improvement = compute_improvement(reference.avg_drop, report.avg_drop);
  }
}

nlohmann::ordered_json report_to_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["schema"] = "xmodal.eval_report";
  j["version"] = kReportSchemaVersion;
  j["model"] = report.model;
  j["tau"] = report.tau;
  j["normal"] = phase_json(report.normal);
  nlohmann::ordered_json strategies = nlohmann::ordered_json::object();
  for (const auto& sr : report.strategies) {
    auto s = phase_json(sr.phase);
    s["drop"] = sr.drop;
    strategies[std::string(name(sr.strategy))] = std::move(s);
  }
  j["strategies"] = std::move(strategies);
  j["adversarial"] = phase_json(report.adversarial);
  j["avg_drop"] = report.avg_drop;
  j["tdi"] = {{"text_only", report.tdi.text_only_accuracy},
              {"image_only", report.tdi.image_only_accuracy},
              {"value", report.tdi.tdi}};
  if (report.reference_model) {
    nlohmann::ordered_json ref;
    ref["model"] = *report.reference_model;
    if (report.improvement) ref["improvement_percent"] = *report.improvement;
    auto tests = nlohmann::ordered_json::array();
    for (const auto& c : report.comparisons) {
      nlohmann::ordered_json t;
      t["name"] = c.name;
      t["mean_diff"] = c.test.mean_diff;
      t["t"] = c.test.t_stat;
      t["p"] = c.test.p_value;
      t["p_adjusted"] = c.p_adjusted;
      t["dof"] = c.test.dof;
      t["cohens_d"] = c.test.cohens_d;
      t["reject"] = c.test.adjusted_reject;
      t["degenerate"] = c.degenerate;
      tests.push_back(std::move(t));
    }
    ref["tests"] = std::move(tests);
    j["reference"] = std::move(ref);
  }
  nlohmann::ordered_json correctness;
  correctness["normal"] = encode_bits(report.normal.correctness);
  for (const auto& sr : report.strategies) {
    correctness[std::string(name(sr.strategy))] = encode_bits(sr.phase.correctness);
  }
  j["correctness"] = std::move(correctness);
  return j;
}

EvalReport report_from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("schema").get<std::string>() != "xmodal.eval_report" ||
        doc.at("version").get<int>() != kReportSchemaVersion) {
      throw SchemaError("not an eval report (schema/version mismatch)");
    }
    EvalReport r;
    r.model = doc.at("model").get<std::string>();
    r.tau = doc.at("tau").get<double>();
    r.normal = phase_from_json(doc.at("normal"));
    const auto& correctness = doc.at("correctness");
    r.normal.correctness = decode_bits(correctness.at("normal").get<std::string>());
    for (Strategy s : kAllStrategies) {
      const std::string key(name(s));
      if (!doc.at("strategies").contains(key)) continue;
      StrategyResult sr;
      sr.strategy = s;
      sr.phase = phase_from_json(doc.at("strategies").at(key));
      sr.drop = doc.at("strategies").at(key).at("drop").get<double>();
      sr.phase.correctness = decode_bits(correctness.at(key).get<std::string>());
      r.adversarial.correctness.insert(r.adversarial.correctness.end(),
                                       sr.phase.correctness.begin(), sr.phase.correctness.end());
      r.strategies.push_back(std::move(sr));
    }
    auto pooled_bits = std::move(r.adversarial.correctness);
    r.adversarial = phase_from_json(doc.at("adversarial"));
    r.adversarial.correctness = std::move(pooled_bits);
    r.avg_drop = doc.at("avg_drop").get<double>();
    r.tdi.text_only_accuracy = doc.at("tdi").at("text_only").get<double>();
    r.tdi.image_only_accuracy = doc.at("tdi").at("image_only").get<double>();
    r.tdi.tdi = doc.at("tdi").at("value").get<double>();
    if (doc.contains("reference")) {
      const auto& ref = doc.at("reference");
      r.reference_model = ref.at("model").get<std::string>();
      if (ref.contains("improvement_percent")) {
        r.improvement = ref.at("improvement_percent").get<double>();
      }
      for (const auto& t : ref.at("tests")) {
        Comparison c;
        c.name = t.at("name").get<std::string>();
        c.test.mean_diff = t.at("mean_diff").get<double>();
        c.test.t_stat = t.at("t").get<double>();
        c.test.p_value = t.at("p").get<double>();
        c.p_adjusted = t.at("p_adjusted").get<double>();
        c.test.dof = t.at("dof").get<long>();
        c.test.cohens_d = t.at("cohens_d").get<double>();
        c.test.adjusted_reject = t.at("reject").get<bool>();
        c.degenerate = t.at("degenerate").get<bool>();
        r.comparisons.push_back(std::move(c));
      }
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("eval report: ") + e.what());
  }
}

}  // namespace xmodal
