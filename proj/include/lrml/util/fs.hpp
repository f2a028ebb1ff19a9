#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace lrml::util {

std::string read_file(const std::filesystem::path& path);

/// Writes `content` to a unique temporary sibling, then renames it over `path`.
/// Concurrent writers of the same path end with one complete file.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);

}  // namespace lrml::util
