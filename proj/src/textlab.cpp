#include "xmodal/textlab.hpp"

#include <json.hpp>

#include <sstream>

#include "xmodal/error.hpp"
#include "xmodal/fs_util.hpp"
#include "xmodal/seed.hpp"

namespace xmodal {
namespace {

constexpr std::array<std::string_view, 4> kStrategyNames = {
    "shape_swap", "color_swap", "position_swap", "random_text"};

std::vector<std::string_view> split_words(std::string_view text) {
  std::vector<std::string_view> words;
  std::size_t i = 0;
  while (i < text.size()) {
    const std::size_t j = text.find(' ', i);
    const std::size_t end = j == std::string_view::npos ? text.size() : j;
    words.push_back(text.substr(i, end - i));
    i = end + 1;
    if (j == std::string_view::npos) break;
  }
  return words;
}

// Draws a value in [0, count) different from `current`.
int draw_other(Rng& rng, int current, int count) {
  int v = static_cast<int>(rng.index(count - 1));
  return v >= current ? v + 1 : v;
}

}  // namespace

ClaimedAttributes claimed_from_spec(const SceneSpec& spec) {
  return {spec.shape, spec.color, spec.position, spec.background};
}

std::string format_caption(const ClaimedAttributes& claim) {
  SceneSpec spec;
  spec.shape = claim.shape;
  spec.color = claim.color;
  spec.position = claim.position;
  spec.background = claim.background;
  return make_caption(spec);
}

ClaimedAttributes parse_caption(std::string_view text) {
  const auto words = split_words(text);
  std::size_t pos = 0;
  auto next = [&]() -> std::string_view {
    return pos < words.size() ? words[pos] : std::string_view{};
  };
  auto fail = [&](std::string_view expected) -> ParseError {
    const std::string seg(next());
    return ParseError("caption does not match template: expected " + std::string(expected) +
                          (seg.empty() ? " at end of text" : ", got '" + seg + "'"),
                      seg);
  };
  auto literal = [&](std::string_view word) {
    if (next() != word) throw fail("'" + std::string(word) + "'");
    ++pos;
  };
  auto field = [&](auto lookup, std::string_view what) {
    auto v = lookup(next());
    if (!v) throw fail(what);
    ++pos;
    return *v;
  };

  ClaimedAttributes claim;
  literal("A");
  claim.color = field(fg_color_from_name, "a color");
  claim.shape = field(shape_from_name, "a shape");
  literal("at");
  literal("the");
  claim.position = field(position_from_name, "a position");
  literal("on");
  literal("a");
  claim.background = field(bg_color_from_name, "a background color");
  literal("background.");
  if (pos != words.size()) throw fail("end of caption");
  return claim;
}

std::optional<ClaimedAttributes> try_parse_caption(std::string_view text) {
  try {
    return parse_caption(text);
  } catch (const ParseError&) {
    return std::nullopt;
  }
}

std::string_view name(Strategy s) { return kStrategyNames[std::size_t(s)]; }

std::optional<Strategy> strategy_from_name(std::string_view s) {
  for (std::size_t i = 0; i < kStrategyNames.size(); ++i) {
    if (kStrategyNames[i] == s) return static_cast<Strategy>(i);
  }
  return std::nullopt;
}

AdversarialVariant perturb(std::string_view caption, Strategy strategy, std::uint64_t seed) {
  const ClaimedAttributes original = parse_caption(caption);
  ClaimedAttributes claim = original;
  Rng rng(derive_seed(seed, fnv1a64(caption), name(strategy)));

  AdversarialVariant out;
  out.strategy = strategy;
  auto swap_shape = [&] {
    claim.shape = static_cast<ShapeKind>(draw_other(rng, int(claim.shape), kShapeCount));
    out.changed.push_back({"shape", std::string(name(original.shape)), std::string(name(claim.shape))});
  };
  auto swap_color = [&] {
    claim.color = static_cast<FgColor>(draw_other(rng, int(claim.color), kFgColorCount));
    out.changed.push_back({"color", std::string(name(original.color)), std::string(name(claim.color))});
  };
  auto swap_position = [&] {
    claim.position = static_cast<PositionBin>(draw_other(rng, int(claim.position), kPositionCount));
    out.changed.push_back(
        {"position", std::string(name(original.position)), std::string(name(claim.position))});
  };

  switch (strategy) {
    case Strategy::shape_swap: swap_shape(); break;
    case Strategy::color_swap: swap_color(); break;
    case Strategy::position_swap: swap_position(); break;
    case Strategy::random_text:
      swap_shape();
      swap_color();
      swap_position();
      break;
  }
  out.caption = format_caption(claim);
  return out;
}

std::vector<AdversarialVariant> generate_adversarial_set(const DatasetManifest& manifest,
                                                         std::uint64_t seed,
                                                         const std::vector<Strategy>& strategies) {
  std::vector<AdversarialVariant> out;
  out.reserve(manifest.samples.size() * strategies.size());
  for (std::size_t i = 0; i < manifest.samples.size(); ++i) {
    const auto& sample = manifest.samples[i];
    const std::uint64_t sample_seed = derive_seed(seed, i, "attack");
    for (Strategy s : strategies) {
      auto v = perturb(sample.caption, s, sample_seed);
      v.sample_id = sample.id;
      out.push_back(std::move(v));
    }
  }
  return out;
}

std::string variants_to_jsonl(const std::vector<AdversarialVariant>& variants) {
  std::string out;
  for (const auto& v : variants) {
    nlohmann::ordered_json rec;
    rec["sample_id"] = v.sample_id;
    rec["strategy"] = name(v.strategy);
    rec["caption"] = v.caption;
    auto changed = nlohmann::ordered_json::array();
    for (const auto& c : v.changed) {
      nlohmann::ordered_json item;
      item["field"] = c.field;
      item["old"] = c.old_value;
      item["new"] = c.new_value;
      changed.push_back(std::move(item));
    }
    rec["changed"] = std::move(changed);
    out += rec.dump();
    out += '\n';
  }
  return out;
}

std::vector<AdversarialVariant> variants_from_jsonl(std::string_view text) {
  std::vector<AdversarialVariant> out;
  std::istringstream in{std::string(text)};
  std::string line;
  try {
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto rec = nlohmann::json::parse(line);
      AdversarialVariant v;
      v.sample_id = rec.at("sample_id").get<std::string>();
      const auto strategy = rec.at("strategy").get<std::string>();
      auto s = strategy_from_name(strategy);
      if (!s) throw ConfigError("variants: unknown strategy '" + strategy + "'");
      v.strategy = *s;
      v.caption = rec.at("caption").get<std::string>();
      for (const auto& c : rec.at("changed")) {
        v.changed.push_back({c.at("field").get<std::string>(), c.at("old").get<std::string>(),
                             c.at("new").get<std::string>()});
      }
      out.push_back(std::move(v));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("variants: ") + e.what());
  }
  return out;
}

void write_variants(const std::filesystem::path& path,
                    const std::vector<AdversarialVariant>& variants) {
  write_file_atomic(path, variants_to_jsonl(variants));
}

std::vector<AdversarialVariant> read_variants(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("variants not found: " + path.string());
  return variants_from_jsonl(read_file(path));
}

}  // namespace xmodal
