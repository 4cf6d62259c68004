#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace rave {

/// Whole file contents; throws IoError naming the path.
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

/// Writes to a sibling temporary file, then renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace rave
