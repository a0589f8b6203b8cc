#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace uxprobe {

// Encoded PNG bytes plus decoded header dimensions.
struct ImageBlob {
  std::vector<std::uint8_t> png;
  int width = 0;
  int height = 0;

  std::string content_hash() const;  // sha256 hex of the encoded bytes
  bool empty() const { return png.empty(); }

  // Reads the IHDR chunk. Returns nullopt if the bytes are not a PNG.
  static std::optional<ImageBlob> from_png(std::vector<std::uint8_t> bytes);

  friend bool operator==(const ImageBlob&, const ImageBlob&) = default;
};

}  // namespace uxprobe
