#include "xmodal/dataset_io.hpp"

#include <json.hpp>

#include <sstream>

#include "xmodal/error.hpp"
#include "xmodal/fs_util.hpp"
#include "xmodal/png_io.hpp"

namespace xmodal {
namespace {

using ordered_json = nlohmann::ordered_json;

template <typename T>
T require_name(std::optional<T> v, std::string_view what, const std::string& got) {
  if (!v) throw ConfigError("manifest: unknown " + std::string(what) + " '" + got + "'");
  return *v;
}

}  // namespace

std::string manifest_to_jsonl(const DatasetManifest& manifest) {
  std::string out;
  ordered_json header;
  header["master_seed"] = manifest.master_seed;
  header["n"] = manifest.samples.size();
  header["version"] = kManifestVersion;
  out += header.dump();
  out += '\n';
  for (const auto& s : manifest.samples) {
    ordered_json rec;
    rec["id"] = s.id;
    rec["shape"] = name(s.spec.shape);
    rec["color"] = name(s.spec.color);
    rec["position"] = name(s.spec.position);
    rec["background"] = name(s.spec.background);
    rec["scale"] = s.spec.scale;
    rec["seed"] = s.spec.sample_seed;
    rec["caption"] = s.caption;
    rec["image_path"] = s.image_path;
    rec["split"] = name(s.split);
    out += rec.dump();
    out += '\n';
  }
  return out;
}

DatasetManifest manifest_from_jsonl(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("manifest: empty file");
  DatasetManifest manifest;
  std::size_t n = 0;
  try {
    const auto header = nlohmann::json::parse(line);
    if (header.value("version", 0) != kManifestVersion) {
      throw ConfigError("manifest: unsupported version");
    }
    manifest.master_seed = header.at("master_seed").get<std::uint64_t>();
    n = header.at("n").get<std::size_t>();
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto rec = nlohmann::json::parse(line);
      Sample s;
      s.id = rec.at("id").get<std::string>();
      const auto shape = rec.at("shape").get<std::string>();
      const auto color = rec.at("color").get<std::string>();
      const auto position = rec.at("position").get<std::string>();
      const auto background = rec.at("background").get<std::string>();
      s.spec.shape = require_name(shape_from_name(shape), "shape", shape);
      s.spec.color = require_name(fg_color_from_name(color), "color", color);
      s.spec.position = require_name(position_from_name(position), "position", position);
      s.spec.background = require_name(bg_color_from_name(background), "background", background);
      s.spec.scale = rec.at("scale").get<int>();
      s.spec.sample_seed = rec.at("seed").get<std::uint64_t>();
      s.caption = rec.at("caption").get<std::string>();
      s.image_path = rec.value("image_path", std::string{});
      s.split = split_from_name(rec.at("split").get<std::string>());
      manifest.samples.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("manifest: ") + e.what());
  }
  if (manifest.samples.size() != n) {
    throw ConfigError("manifest: header declares " + std::to_string(n) + " samples, found " +
                      std::to_string(manifest.samples.size()));
  }
  return manifest;
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  write_file_atomic(path, manifest_to_jsonl(manifest));
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw ConfigError("manifest not found: " + path.string());
  }
  return manifest_from_jsonl(read_file(path));
}

DatasetManifest write_dataset(const std::filesystem::path& dir, DatasetManifest manifest) {
  std::filesystem::create_directories(dir / "images");
  for (auto& s : manifest.samples) {
    s.image_path = "images/" + s.id + ".png";
    write_png(dir / s.image_path, render_scene(s.spec));
  }
  write_manifest(dir / "manifest.jsonl", manifest);
  return manifest;
}

Raster load_sample_image(const Sample& sample, const std::filesystem::path& base_dir) {
  if (!sample.image_path.empty()) {
    const auto path = base_dir / sample.image_path;
    if (std::filesystem::exists(path)) return read_png(path);
  }
  return render_scene(sample.spec);
}

}  // namespace xmodal
