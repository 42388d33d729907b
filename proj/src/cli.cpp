#include "xmodal/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "xmodal/calibration.hpp"
#include "xmodal/dataset_io.hpp"
#include "xmodal/error.hpp"
#include "xmodal/fs_util.hpp"
#include "xmodal/harness.hpp"
#include "xmodal/remote.hpp"
#include "xmodal/report.hpp"
#include "xmodal/scenegen.hpp"
#include "xmodal/textlab.hpp"

#ifndef XMODAL_DATA_DIR
#define XMODAL_DATA_DIR "data"
#endif

namespace fs = std::filesystem;

namespace xmodal::cli {
namespace {

class CalibrationFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// --config files are JSON: one object per subcommand, keys named after the
// long flags, e.g. {"eval": {"scorer": "oracle", "tau-step": 0.01}}.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App*, bool, bool, std::string) const override {
    return "{}";
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(input);
    } catch (const nlohmann::json::parse_error& e) {
      throw CLI::ConversionError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw CLI::ConversionError("config must be a JSON object");
    std::vector<CLI::ConfigItem> items;
    collect(doc, {}, items);
    return items;
  }

 private:
  static std::string scalar(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }

  static void collect(const nlohmann::json& obj, const std::vector<std::string>& parents,
                      std::vector<CLI::ConfigItem>& items) {
    for (const auto& [key, value] : obj.items()) {
      if (value.is_object()) {
        auto next = parents;
        next.push_back(key);
        // CLI11 wants an explicit section marker before a subcommand's keys.
        items.push_back({next, "++", {}});
        collect(value, next, items);
        items.push_back({next, "--", {}});
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(scalar(v));
      } else {
        item.inputs.push_back(scalar(value));
      }
      items.push_back(std::move(item));
    }
  }
};

std::vector<Strategy> parse_strategies(const std::vector<std::string>& names) {
  std::vector<Strategy> out;
  for (const auto& raw : names) {
    std::stringstream ss(raw);
    std::string name;
    while (std::getline(ss, name, ',')) {
      if (name.empty()) continue;
      if (name == "all") {
        out.assign(kAllStrategies.begin(), kAllStrategies.end());
        continue;
      }
      auto s = strategy_from_name(name);
      if (!s) throw ConfigError("unknown strategy '" + name + "'");
      if (std::find(out.begin(), out.end(), *s) == out.end()) out.push_back(*s);
    }
  }
  if (out.empty()) throw ConfigError("no strategies selected");
  // Canonical order keeps outputs independent of how the list was spelled.
  std::vector<Strategy> ordered;
  for (Strategy s : kAllStrategies) {
    if (std::find(out.begin(), out.end(), s) != out.end()) ordered.push_back(s);
  }
  return ordered;
}

fs::path manifest_file(const fs::path& p) {
  return fs::is_directory(p) ? p / "manifest.jsonl" : p;
}

void write_json(const fs::path& path, const nlohmann::ordered_json& doc) {
  write_file_atomic(path, doc.dump(2) + "\n");
}

nlohmann::json read_json(const fs::path& path, std::string_view what) {
  if (!fs::exists(path)) throw ConfigError(std::string(what) + " not found: " + path.string());
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string(what) + " " + path.string() + ": " + e.what());
  }
}

struct GenOptions {
  long n = 1000;
  std::uint64_t seed = 42;
  std::string out;
  std::vector<double> splits = {0.6, 0.2, 0.2};
};

struct AttackOptions {
  std::string manifest;
  std::uint64_t seed = 42;
  std::vector<std::string> strategies = {"all"};
  std::string out;
};

struct EvalOptions {
  std::string manifest;
  std::string variants;
  std::string scorer = "oracle";
  std::string personas;
  std::string reference;
  std::string out;
  std::string correctness_csv;
  std::vector<std::string> strategies = {"all"};
  EvalConfig config;
};

struct CalibrateOptions {
  std::string targets = std::string(XMODAL_DATA_DIR) + "/reference_targets.json";
  std::string manifest;
  std::string variants;
  long n = 1000;
  std::uint64_t seed = 42;
  std::string out = "personas.json";
  int max_evals = 500;
  EvalConfig config;
};

struct ReportOptions {
  std::vector<std::string> reports;
  std::string out = "report";
  std::vector<std::string> figures = {"all"};
  double alpha = 0.05;
};

void add_eval_config(CLI::App* cmd, EvalConfig& c) {
  cmd->add_option("--tau-lo", c.tau_lo, "Lower end of the threshold grid")->capture_default_str();
  cmd->add_option("--tau-hi", c.tau_hi, "Upper end of the threshold grid")->capture_default_str();
  cmd->add_option("--tau-step", c.tau_step, "Threshold grid step")->capture_default_str();
  cmd->add_option("--z", c.z, "Normal quantile for Wilson intervals")->capture_default_str();
  cmd->add_option("--alpha", c.alpha, "Family-wise error rate")->capture_default_str();
  cmd->add_option("--negatives", c.negative_per_positive,
                  "Random negatives per validation positive")
      ->capture_default_str();
}

int cmd_gen(const GenOptions& o, std::ostream& out) {
  if (o.n < 1) throw ConfigError("--n must be at least 1");
  if (o.out.empty()) throw ConfigError("--out is required");
  if (o.splits.size() != 3) throw ConfigError("--splits takes three fractions");
  auto manifest = generate_dataset(std::size_t(o.n), o.seed,
                                   SplitFractions{o.splits[0], o.splits[1], o.splits[2]});
  manifest = write_dataset(o.out, std::move(manifest));
  const auto counts = manifest.split_counts();
  out << "wrote " << manifest.samples.size() << " samples to " << o.out << " (train "
      << counts[0] << ", validation " << counts[1] << ", test " << counts[2] << ")\n";
  return kExitOk;
}

int cmd_attack(const AttackOptions& o, std::ostream& out) {
  if (o.manifest.empty()) throw ConfigError("--manifest is required");
  const fs::path mpath = manifest_file(o.manifest);
  const auto manifest = read_manifest(mpath);
  const auto strategies = parse_strategies(o.strategies);
  const auto variants = generate_adversarial_set(manifest, o.seed, strategies);
  const fs::path dest = o.out.empty() ? mpath.parent_path() / "variants.jsonl" : fs::path(o.out);
  write_variants(dest, variants);
  out << "wrote " << variants.size() << " variants (" << strategies.size()
      << " per sample) to " << dest.string() << "\n";
  return kExitOk;
}

std::unique_ptr<Scorer> make_scorer(const std::string& selector, const std::string& personas) {
  if (selector == "oracle") return std::make_unique<OracleScorer>();
  if (selector.rfind("persona:", 0) == 0) {
    const std::string label = selector.substr(8);
    if (personas.empty()) throw ConfigError("--scorer persona:<label> needs --personas");
    for (const auto& p : read_personas(personas)) {
      if (p.label == label) return std::make_unique<PersonaScorer>(p);
    }
    throw ConfigError("persona '" + label + "' not found in " + personas);
  }
  if (selector.rfind("remote:", 0) == 0) {
    const std::string url = selector.substr(7);
    if (url.empty()) throw ConfigError("remote scorer needs a URL");
    return std::make_unique<RemoteScorer>(url);
  }
  throw ConfigError("unknown scorer '" + selector + "' (oracle | persona:<label> | remote:<url>)");
}

std::string correctness_csv(const DatasetManifest& manifest,
                            const std::vector<AdversarialVariant>& variants,
                            const EvalConfig& config, const EvalReport& report) {
  std::string csv = "phase,pair_id,correct\r\n";
  auto emit = [&](std::string_view phase, const PairSet& pairs,
                  const std::vector<std::uint8_t>& correct) {
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      csv += std::string(phase) + "," + pairs[i].id + "," + (correct[i] ? "1" : "0") + "\r\n";
    }
  };
  emit("normal", build_pairs(manifest, variants, Phase::normal, config),
       report.normal.correctness);
  for (const auto& sr : report.strategies) {
    emit(name(sr.strategy), build_pairs(manifest, variants, Phase::adversarial, config, sr.strategy),
         sr.phase.correctness);
  }
  return csv;
}

int cmd_eval(EvalOptions o, std::ostream& out) {
  if (o.manifest.empty()) throw ConfigError("--manifest is required");
  o.config.validate();
  const fs::path mpath = manifest_file(o.manifest);
  const auto manifest = read_manifest(mpath);
  const fs::path vpath = o.variants.empty() ? mpath.parent_path() / "variants.jsonl"
                                            : fs::path(o.variants);
  if (!fs::exists(vpath)) throw ConfigError("variants file not found: " + vpath.string());
  const auto variants = read_variants(vpath);
  const auto strategies = parse_strategies(o.strategies);
  o.config.master_seed = manifest.master_seed;

  auto scorer = make_scorer(o.scorer, o.personas);
  const ImageSource images(manifest, mpath.parent_path());
  EvalReport report = evaluate(*scorer, manifest, variants, o.config, images, strategies);
  if (!o.reference.empty()) {
    attach_reference(report, report_from_json(read_json(o.reference, "reference report")),
                     o.config.alpha);
  }
  const auto doc = report_to_json(report);
  if (o.out.empty()) {
    out << doc.dump(2) << "\n";
  } else {
    write_json(o.out, doc);
    out << report.model << ": tau " << report::format3(report.tau) << ", normal accuracy "
        << report::format3(report.normal.accuracy) << ", avg drop "
        << report::format3(report.avg_drop) << ", TDI " << report::format3(report.tdi.tdi)
        << "\n";
  }
  if (!o.correctness_csv.empty()) {
    write_file_atomic(o.correctness_csv, correctness_csv(manifest, variants, o.config, report));
  }
  return kExitOk;
}

int cmd_calibrate(CalibrateOptions o, std::ostream& out, std::ostream& err) {
  const auto targets = read_targets(o.targets);
  o.config.validate();
  DatasetManifest manifest;
  fs::path base_dir;
  if (!o.manifest.empty()) {
    const fs::path mpath = manifest_file(o.manifest);
    manifest = read_manifest(mpath);
    base_dir = mpath.parent_path();
  } else {
    if (o.n < 1) throw ConfigError("--n must be at least 1");
    manifest = generate_dataset(std::size_t(o.n), o.seed);
  }
  std::vector<AdversarialVariant> variants;
  if (!o.variants.empty()) {
    if (!fs::exists(o.variants)) throw ConfigError("variants file not found: " + o.variants);
    variants = read_variants(o.variants);
  } else {
    variants = generate_adversarial_set(manifest, manifest.master_seed);
  }
  o.config.master_seed = manifest.master_seed;
  SearchOptions search;
  search.max_refine_evaluations = o.max_evals;
  const ImageSource images(manifest, base_dir);
  const auto results = calibrate_personas(manifest, variants, targets, o.config, images, {}, search);
  const std::string residuals = residual_report(results);
  const bool ok = std::all_of(results.begin(), results.end(),
                              [](const CalibrationResult& r) { return r.within_tolerance; });
  if (!ok) {
    err << "calibration failed: no parameter vector within tolerance\n" << residuals;
    throw CalibrationFailure("calibration failed");
  }
  write_json(o.out, personas_to_json(results, manifest.master_seed));
  out << residuals << "wrote " << results.size() << " personas to " << o.out << "\n";
  return kExitOk;
}

int cmd_report(const ReportOptions& o, std::ostream& out) {
  if (o.reports.empty()) throw ConfigError("report needs at least one report file");
  std::vector<EvalReport> reports;
  for (const auto& path : o.reports) {
    try {
      reports.push_back(report_from_json(read_json(path, "report")));
    } catch (const SchemaError& e) {
      throw ConfigError(path + ": " + e.what());
    }
  }
  std::vector<report::FigureKind> kinds;
  for (const auto& raw : o.figures) {
    std::stringstream ss(raw);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item == "all") {
        kinds.assign(report::kAllFigures.begin(), report::kAllFigures.end());
      } else if (item == "none") {
        kinds.clear();
      } else if (auto k = report::figure_kind_from_name(item)) {
        if (std::find(kinds.begin(), kinds.end(), *k) == kinds.end()) kinds.push_back(*k);
      } else if (!item.empty()) {
        throw ConfigError("unknown figure '" + item + "'");
      }
    }
  }
  const fs::path dir = o.out;
  fs::create_directories(dir);
  const auto tables = report::render_tables(reports, o.alpha);
  write_file_atomic(dir / "table1.csv", tables.table1_csv);
  write_file_atomic(dir / "table2.csv", tables.table2_csv);
  write_file_atomic(dir / "comparisons.csv", tables.comparisons_csv);
  write_file_atomic(dir / "summary.txt", tables.text);
  for (auto kind : kinds) {
    auto spec = report::default_figure(kind, reports);
    write_file_atomic(dir / spec.output, report::render_figure(spec, reports));
  }
  out << tables.text;
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cross-modal text-dependency evaluation toolkit", "xmodal"};
  app.require_subcommand(1);
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON configuration file (flags take precedence)");

  GenOptions gen;
  auto* g = app.add_subcommand("gen", "Generate the shapes dataset");
  g->add_option("--n", gen.n, "Number of samples")->capture_default_str();
  g->add_option("--seed", gen.seed, "Master seed")->capture_default_str();
  g->add_option("--out", gen.out, "Output directory");
  g->add_option("--splits", gen.splits, "train validation test fractions")->expected(3);

  AttackOptions attack;
  auto* a = app.add_subcommand("attack", "Write adversarial caption variants");
  a->add_option("--manifest", attack.manifest, "Manifest file or dataset directory");
  a->add_option("--seed", attack.seed, "Attack seed")->capture_default_str();
  a->add_option("--strategies", attack.strategies, "all, or a list of strategies");
  a->add_option("--out", attack.out, "Variants file (default: next to the manifest)");

  EvalOptions ev;
  auto* e = app.add_subcommand("eval", "Evaluate a scorer on the two-phase protocol");
  e->add_option("--manifest", ev.manifest, "Manifest file or dataset directory");
  e->add_option("--variants", ev.variants, "Variants file (default: next to the manifest)");
  e->add_option("--scorer", ev.scorer, "oracle | persona:<label> | remote:<url>")
      ->capture_default_str();
  e->add_option("--personas", ev.personas, "Personas file from calibrate");
  e->add_option("--reference", ev.reference, "Report to compare against");
  e->add_option("--out", ev.out, "Report file (default: stdout)");
  e->add_option("--correctness-csv", ev.correctness_csv, "Per-pair correctness export");
  e->add_option("--strategies", ev.strategies, "all, or a list of strategies");
  add_eval_config(e, ev.config);

  CalibrateOptions cal;
  auto* c = app.add_subcommand("calibrate", "Fit personas to target drop tables");
  c->add_option("--targets", cal.targets, "Targets file")->capture_default_str();
  c->add_option("--manifest", cal.manifest, "Manifest (default: generate in memory)");
  c->add_option("--variants", cal.variants, "Variants (default: generate in memory)");
  c->add_option("--n", cal.n, "Samples when generating in memory")->capture_default_str();
  c->add_option("--seed", cal.seed, "Master seed when generating in memory")
      ->capture_default_str();
  c->add_option("--out", cal.out, "Personas file")->capture_default_str();
  c->add_option("--max-evals", cal.max_evals, "Refinement evaluations per start")
      ->capture_default_str();
  add_eval_config(c, cal.config);

  ReportOptions rep;
  auto* r = app.add_subcommand("report", "Render tables and figures from reports");
  r->add_option("reports", rep.reports, "Report files");
  r->add_option("--out", rep.out, "Output directory")->capture_default_str();
  r->add_option("--figures", rep.figures, "all, none, or a list of figure kinds");
  r->add_option("--alpha", rep.alpha, "Family-wise error rate")->capture_default_str();

  for (auto* sub : {g, a, e, c, r}) sub->fallthrough();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*g) return cmd_gen(gen, out);
    if (*a) return cmd_attack(attack, out);
    if (*e) return cmd_eval(ev, out);
    if (*c) return cmd_calibrate(cal, out, err);
    if (*r) return cmd_report(rep, out);
  } catch (const CalibrationFailure&) {
    return kExitCalibration;
  } catch (const RemoteError& ex) {
    err << "error: remote scorer (" << name(ex.kind()) << ", " << ex.attempts()
        << " attempts): " << ex.what() << "\n";
    return kExitRemote;
  } catch (const ConfigError& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitConfig;
  } catch (const SchemaError& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitConfig;
  } catch (const ParseError& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitFailure;
  }
  return kExitConfig;
}

}  // namespace xmodal::cli
