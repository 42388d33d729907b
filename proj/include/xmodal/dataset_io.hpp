#pragma once

#include <filesystem>
#include <string>

#include "xmodal/scenegen.hpp"

namespace xmodal {

inline constexpr int kManifestVersion = 1;

/// JSON Lines: a header {master_seed, n, version} followed by one record per
/// sample {id, shape, color, position, background, scale, seed, caption,
/// image_path, split}.
std::string manifest_to_jsonl(const DatasetManifest& manifest);
DatasetManifest manifest_from_jsonl(std::string_view text);

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::filesystem::path& path);

/// Writes images/<id>.png for every sample plus manifest.jsonl under dir and
/// updates image_path in the returned manifest.
DatasetManifest write_dataset(const std::filesystem::path& dir, DatasetManifest manifest);

/// Decodes the stored PNG when the sample has one under base_dir, otherwise
/// renders the spec.
Raster load_sample_image(const Sample& sample, const std::filesystem::path& base_dir);

}  // namespace xmodal
