#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mirage {

using Bytes = std::vector<std::uint8_t>;

inline std::span<const std::uint8_t> as_bytes(std::string_view s) noexcept {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

std::string base64_encode(std::span<const std::uint8_t> bytes);
// Throws ParseError on malformed input.
Bytes base64_decode(std::string_view text);

// Lowercase hex of the SHA-256 digest.
std::string sha256_hex(std::span<const std::uint8_t> bytes);

std::string hex_lower(std::span<const std::uint8_t> bytes);

inline constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = kFnvOffset;
  for (char c : s) {
    h ^= static_cast<std::uint8_t>(c);
    h *= kFnvPrime;
  }
  return h;
}

// 8-bit RGB PNG, stored (uncompressed) deflate blocks. `rgb` is row-major,
// width * height * 3 bytes.
Bytes encode_png_rgb(std::uint32_t width, std::uint32_t height,
                     std::span<const std::uint8_t> rgb);

// Best-effort media type from magic bytes.
std::string sniff_media_type(std::span<const std::uint8_t> bytes);

}  // namespace mirage
