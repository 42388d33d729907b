#include <doctest.h>

#include <cmath>
#include <map>

#include "xmodal/calibration.hpp"
#include "xmodal/error.hpp"
#include "xmodal/harness.hpp"
#include "xmodal/scorers.hpp"
#include "xmodal/seed.hpp"

using namespace xmodal;

namespace {

struct Fixture {
  DatasetManifest manifest;
  std::vector<AdversarialVariant> variants;
  EvalConfig config;
  explicit Fixture(std::size_t n) : manifest(generate_dataset(n, 42)) {
    variants = generate_adversarial_set(manifest, 42);
    config.master_seed = 42;
  }
};

PersonaParams persona(double lambda, FieldTriple rho, double sigma, FieldTriple deference = {}) {
  PersonaParams p;
  p.label = "t";
  p.text_reliance = lambda;
  p.visual_reliability = rho;
  p.text_deference = deference;
  p.noise_sigma = sigma;
  p.persona_seed = 11;
  return p;
}

std::vector<Label> labels_of(const PairSet& pairs) {
  std::vector<Label> out;
  for (const auto& p : pairs) out.push_back(p.label);
  return out;
}

}  // namespace

TEST_CASE("persona score examples") {
  SceneSpec spec;
  const Raster image = render_scene(spec);
  const std::string caption = make_caption(spec);
  const std::string swapped = perturb(caption, Strategy::shape_swap, 1).caption;
  const FieldTriple ideal{1, 1, 1};

  CHECK(persona_score(image, caption, persona(1, ideal, 0), "a") == 1.0);
  CHECK(persona_score(image, swapped, persona(1, ideal, 0), "a") == 1.0);
  CHECK(persona_score(render_noise_image(3), swapped, persona(1, ideal, 0), "a") == 1.0);
  CHECK(persona_score(image, caption, persona(0, ideal, 0), "a") == 1.0);
  CHECK(persona_score(image, swapped, persona(0, ideal, 0), "a") == doctest::Approx(2.0 / 3.0));
  CHECK(persona_score(image, swapped, persona(0.6, ideal, 0), "a") ==
        doctest::Approx(0.4 * (2.0 / 3.0) + 0.6).epsilon(1e-12));
  CHECK(std::abs(persona_score(image, swapped, persona(0.6, ideal, 0), "a") - 0.8667) < 1e-4);

  // Full deference turns every parseable claim into agreement; the neutral
  // caption claims nothing.
  CHECK(persona_score(image, swapped, persona(0, ideal, 0, {1, 1, 1}), "a") == 1.0);
  CHECK(persona_score(image, neutral_caption(), persona(0, ideal, 0, {1, 1, 1}), "a") == 0.0);

  CHECK(oracle_score(image, caption) == 1.0);
  CHECK(oracle_score(image, perturb(caption, Strategy::color_swap, 2).caption) == doctest::Approx(2.0 / 3.0));
  CHECK(oracle_score(image, perturb(caption, Strategy::random_text, 2).caption) == 0.0);

  // Same inputs, same score; the noise term depends on the pair id.
  const auto noisy = persona(0.2, {0.8, 0.9, 0.7}, 0.1);
  CHECK(persona_score(image, swapped, noisy, "x") == persona_score(image, swapped, noisy, "x"));

  CHECK_THROWS_AS(persona(1.5, ideal, 0).validate(), ConfigError);
  CHECK_THROWS_AS(persona(0.5, ideal, -1).validate(), ConfigError);
}

TEST_CASE("persona scorer batch path equals the single path") {
  Fixture f(60);
  PersonaScorer a(persona(0.3, {0.8, 0.9, 0.7}, 0.05, {0.1, 0.0, 0.2}));
  PersonaScorer b(a.params());
  const ImageSource images(f.manifest);
  const auto pairs = build_pairs(f.manifest, f.variants, Phase::adversarial, f.config, Strategy::color_swap);
  const auto batch = score_pairs(a, pairs, images);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    CHECK(b.score(images.load(pairs[i].image), pairs[i].text, pairs[i].id) == batch[i]);
  }
}

TEST_CASE("pair construction") {
  Fixture f(1000);
  const auto normal = build_pairs(f.manifest, f.variants, Phase::normal, f.config);
  CHECK(normal.size() == 1000);
  for (const auto& p : normal) CHECK(p.label == Label::match);
  const auto adv = build_pairs(f.manifest, f.variants, Phase::adversarial, f.config, Strategy::shape_swap);
  CHECK(adv.size() == 1000);
  for (const auto& p : adv) CHECK(p.label == Label::no_match);
  const auto val = build_pairs(f.manifest, f.variants, Phase::validation, f.config);
  long match = 0;
  for (const auto& p : val) match += p.label == Label::match;
  CHECK(2 * match == long(val.size()));
  CHECK_THROWS_AS(build_pairs(f.manifest, {}, Phase::adversarial, f.config, Strategy::color_swap), ConfigError);
}

TEST_CASE("threshold optimization") {
  EvalConfig c;
  const std::vector<double> scores = {0.9, 0.8, 0.3, 0.2};
  const std::vector<Label> labels = {Label::match, Label::match, Label::no_match, Label::no_match};
  CHECK(optimize_threshold(scores, labels, c) == doctest::Approx(0.30));

  const std::vector<double> flat(4, 0.5);
  CHECK(optimize_threshold(flat, labels, c) == c.tau_lo);
  const std::vector<Label> one(4, Label::match);
  CHECK_THROWS_AS(optimize_threshold(scores, one, c), StatsError);

  Fixture f(200);
  OracleScorer oracle;
  const ImageSource images(f.manifest);
  const auto val = build_pairs(f.manifest, f.variants, Phase::validation, f.config);
  const auto s = score_pairs(oracle, val, images);
  const auto lab = labels_of(val);
  const double tau = optimize_threshold(s, lab, c);
  CHECK(tau > 2.0 / 3.0);
  CHECK(tau < 1.0);
  CHECK(phase_from_scores(s, lab, tau, 1.96).accuracy == 1.0);
}

TEST_CASE("phase accuracy examples") {
  Fixture f(200);
  const ImageSource images(f.manifest);
  OracleScorer oracle;
  const auto normal = build_pairs(f.manifest, f.variants, Phase::normal, f.config);
  CHECK(run_phase(oracle, normal, 0.7, images).accuracy == 1.0);

  PersonaScorer text(persona(1, {1, 1, 1}, 0));
  const auto adv = build_pairs(f.manifest, f.variants, Phase::adversarial, f.config, Strategy::position_swap);
  CHECK(run_phase(text, adv, 0.7, images).accuracy == 0.0);

  PersonaScorer visual(persona(0, {1, 1, 1}, 0));
  const auto shape = build_pairs(f.manifest, f.variants, Phase::adversarial, f.config, Strategy::shape_swap);
  const auto r = run_phase(visual, shape, 0.7, images);
  CHECK(r.accuracy == 1.0);
  CHECK(r.correct == 200);
  CHECK(r.n == 200);
}

TEST_CASE("drops, improvement, TDI") {
  const auto d = compute_drops(1.0, {{Strategy::shape_swap, 0.73}});
  CHECK(d.drops.at(Strategy::shape_swap) == doctest::Approx(0.270));
  const auto avg = compute_drops(1.0, {{Strategy::shape_swap, 0.73},
                                       {Strategy::color_swap, 0.75},
                                       {Strategy::position_swap, 0.70},
                                       {Strategy::random_text, 0.72}});
  CHECK(avg.average == doctest::Approx(0.275));
  CHECK(compute_drops(0.9, {{Strategy::color_swap, 0.9}}).drops.at(Strategy::color_swap) == 0.0);

  CHECK(compute_improvement(0.275, 0.098) == doctest::Approx(64.3636).epsilon(1e-4));
  CHECK(std::round(compute_improvement(0.275, 0.098) * 10) / 10 == 64.4);
  CHECK(std::round(compute_improvement(0.275, 0.180) * 10) / 10 == 34.5);
  CHECK(compute_improvement(0.2, 0.2) == 0.0);
  CHECK_THROWS_AS(compute_improvement(0.0, 0.1), StatsError);

  Fixture f(200);
  const ImageSource images(f.manifest);
  const auto to = build_pairs(f.manifest, f.variants, Phase::text_only, f.config);
  const auto io = build_pairs(f.manifest, f.variants, Phase::image_only, f.config);
  ConstantScorer constant(0.5);
  CHECK(compute_tdi(constant, to, io, 0.4, images).tdi == 0.0);
  PersonaScorer text(persona(1, {1, 1, 1}, 0));
  CHECK(compute_tdi(text, to, io, 0.7, images).tdi > 0.0);
  OracleScorer oracle;
  CHECK(compute_tdi(oracle, to, io, 0.7, images).tdi <= 0.0);
}

TEST_CASE("report identities over random personas") {
  Fixture f(100);
  const ImageSource images(f.manifest);
  Rng rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    PersonaScorer scorer(persona(rng.uniform(), {0.5 + rng.uniform() / 2, 0.5 + rng.uniform() / 2, 0.5 + rng.uniform() / 2},
                                 0.1 * rng.uniform(), {0.2 * rng.uniform(), 0.2 * rng.uniform(), 0.2 * rng.uniform()}));
    const auto r = evaluate(scorer, f.manifest, f.variants, f.config, images);
    double sum = 0.0;
    for (const auto& s : r.strategies) {
      CHECK(s.drop == r.normal.accuracy - s.phase.accuracy);
      sum += s.drop;
    }
    CHECK(r.avg_drop == sum / 4.0);
    const auto back = report_from_json(report_to_json(r));
    CHECK(report_to_json(back).dump() == report_to_json(r).dump());
  }
}

TEST_CASE("text reliance sweep is monotone") {
  Fixture f(120);
  const ImageSource images(f.manifest);
  double prev = -1.0;
  for (int k = 0; k <= 10; ++k) {
    PersonaScorer scorer(persona(k / 10.0, {1, 1, 1}, 0));
    const auto r = evaluate(scorer, f.manifest, f.variants, f.config, images);
    CHECK(r.avg_drop >= prev);
    prev = r.avg_drop;
    if (k == 0) CHECK(r.avg_drop == 0.0);
    if (k == 10) CHECK(r.avg_drop == r.normal.accuracy);
  }
}

TEST_CASE("simulator agrees with the full evaluation") {
  Fixture f(200);
  const ImageSource images(f.manifest);
  const auto evidence = collect_evidence(f.manifest, images);
  const std::uint64_t seed = persona_seed_for(42, "probe");
  const PersonaSimulator sim(f.manifest, f.variants, f.config, evidence, seed);
  for (const auto& base : {persona(0.3, {0.9, 0.8, 0.95}, 0.05, {0.1, 0.05, 0.2}),
                           persona(0.5, {1, 1, 1}, 0.0), persona(0.1, {0.6, 0.7, 0.8}, 0.2)}) {
    auto p = base;
    p.persona_seed = seed;
    const auto m = sim.run(p);
    PersonaScorer scorer(p);
    const auto r = evaluate(scorer, f.manifest, f.variants, f.config, images);
    CHECK(m.tau == r.tau);
    CHECK(m.normal_accuracy == r.normal.accuracy);
    CHECK(m.avg_drop == doctest::Approx(r.avg_drop).epsilon(1e-12));
    for (const auto& s : r.strategies) CHECK(m.drops.at(s.strategy) == doctest::Approx(s.drop).epsilon(1e-12));
  }
}

TEST_CASE("calibration: ideal limit and determinism") {
  Fixture f(300);
  const ImageSource images(f.manifest);
  CalibrationTarget ideal;
  ideal.label = "ideal";
  ideal.normal_accuracy = 1.0;
  for (Strategy s : kAllStrategies) ideal.drops[s] = 0.0;
  ideal.avg_drop = 0.0;
  const auto results = calibrate_personas(f.manifest, f.variants, {ideal}, f.config, images);
  REQUIRE(results.size() == 1);
  const auto& r = results[0];
  CHECK(r.within_tolerance);
  CHECK(std::abs(r.avg_drop_residual) < 0.01);
  for (const auto& [s, res] : r.drop_residuals) CHECK(std::abs(res) < 0.01);
  CHECK(r.params.text_reliance < 0.2);

  const auto again = calibrate_personas(f.manifest, f.variants, {ideal}, f.config, images);
  CHECK(again[0].params == r.params);

  const auto json = personas_to_json(results, 42);
  const auto parsed = personas_from_json(nlohmann::json::parse(json.dump()));
  REQUIRE(parsed.size() == 1);
  CHECK(parsed[0] == r.params);
}

TEST_CASE("calibration flags infeasible targets") {
  Fixture f(200);
  const ImageSource images(f.manifest);
  CalibrationTarget bad;
  bad.label = "bad";
  bad.normal_accuracy = 0.8;
  for (Strategy s : kAllStrategies) bad.drops[s] = 0.9;
  bad.avg_drop = 0.9;
  const auto r = calibrate_personas(f.manifest, f.variants, {bad}, f.config, images);
  CHECK_FALSE(r[0].within_tolerance);
  CHECK(residual_report(r).find("OUT OF TOLERANCE") != std::string::npos);
}

TEST_CASE("targets JSON") {
  const auto targets = targets_from_json(nlohmann::json::parse(R"([{"label":"x","normal_accuracy":0.9,
      "drops":{"shape_swap":0.1,"color_swap":0.2,"position_swap":0.3,"random_text":0.4}}])"));
  REQUIRE(targets.size() == 1);
  CHECK(targets[0].avg_drop == doctest::Approx(0.25));
  CHECK_THROWS(targets_from_json(nlohmann::json::parse(R"([{"label":"x"}])")));
  const auto shipped = read_targets(std::filesystem::path(XMODAL_TEST_DIR) / ".." / "data" / "reference_targets.json");
  CHECK(shipped.size() == 3);
}
