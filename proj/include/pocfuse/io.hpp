#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace pocfuse::io {

/// Whole-file read; throws DataError if the file cannot be opened.
std::string read_file(const std::filesystem::path& path);

/// Writes via a temporary sibling and rename so readers never see a partial file.
void write_file(const std::filesystem::path& path, std::string_view data);

/// Lower-case hex SHA-256.
std::string sha256_hex(std::string_view data);

}  // namespace pocfuse::io
