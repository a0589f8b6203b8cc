#include "uxprobe/common/image.hpp"

#include <array>

#include "uxprobe/common/encoding.hpp"

namespace uxprobe {

std::string ImageBlob::content_hash() const { return sha256_hex(png); }

std::optional<ImageBlob> ImageBlob::from_png(std::vector<std::uint8_t> bytes) {
  static constexpr std::array<std::uint8_t, 8> kSignature = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
  if (bytes.size() < 33) return std::nullopt;
  for (std::size_t i = 0; i < kSignature.size(); ++i) {
    if (bytes[i] != kSignature[i]) return std::nullopt;
  }
  if (bytes[12] != 'I' || bytes[13] != 'H' || bytes[14] != 'D' || bytes[15] != 'R') return std::nullopt;
  auto be32 = [&](std::size_t at) {
    return static_cast<int>((static_cast<std::uint32_t>(bytes[at]) << 24) | (static_cast<std::uint32_t>(bytes[at + 1]) << 16) |
                            (static_cast<std::uint32_t>(bytes[at + 2]) << 8) | bytes[at + 3]);
  };
  ImageBlob blob;
  blob.width = be32(16);
  blob.height = be32(20);
  blob.png = std::move(bytes);
  return blob;
}

}  // namespace uxprobe
