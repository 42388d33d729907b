#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace xmodal {

/// Writes to a sibling temp file and renames over the target, so readers
/// never observe a partially written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

}  // namespace xmodal
