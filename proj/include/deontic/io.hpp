#pragma once

#include <filesystem>
#include <string>

namespace deontic::io {

std::string read_file(const std::filesystem::path& path);

/// Writes to a temporary sibling and renames it over `path` on success,
/// so readers never observe a partial file.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace deontic::io
