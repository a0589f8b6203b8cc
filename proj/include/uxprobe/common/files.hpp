#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace uxprobe {

// Writes via a sibling temp file, fsync and rename, so readers observe either
// the old content or the complete new content.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, std::string_view text);

std::string read_text_file(const std::filesystem::path& path);
std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path);

// UTC, second resolution: 2025-01-31T12:00:00Z
std::string iso8601_now();

}  // namespace uxprobe
