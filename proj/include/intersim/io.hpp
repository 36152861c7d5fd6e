#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace intersim {

/// Whole file as bytes. Throws ConfigError if it cannot be read.
std::string read_file(const std::filesystem::path& path);

/// Writes bytes, replacing any existing file. Throws Error on failure.
void write_file(const std::filesystem::path& path, std::string_view bytes);

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);

}  // namespace intersim
