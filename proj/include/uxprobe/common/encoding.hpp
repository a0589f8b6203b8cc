#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace uxprobe {

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::string_view text);

// Raw 20-byte SHA-1 digest (WebSocket handshake only).
std::string sha1_raw(std::string_view text);

std::string to_lower(std::string_view text);
std::string trim(std::string_view text);
std::string collapse_whitespace(std::string_view text);

// Invalid UTF-8 sequences replaced by U+FFFD, the same way JSON output
// replaces them, so a string survives a persist/load cycle unchanged.
std::string valid_utf8(std::string_view text);

// Case-insensitive substring test on ASCII.
bool contains_icase(std::string_view haystack, std::string_view needle);

}  // namespace uxprobe
