#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace p3 {

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

/// Hash over the relative paths and contents of every regular file below
/// `dir`, visited in sorted order.
std::string sha256_directory(const std::filesystem::path& dir);

/// 16 hex characters derived from (match_id, event_id).
std::string moment_id_for(std::string_view match_id, std::string_view event_id);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace p3
