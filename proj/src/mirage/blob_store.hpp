#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "mirage/codec.hpp"

namespace mirage {

struct Blob {
  Bytes bytes;
  std::string media_type;
};

// Content-addressed, append-only directory of byte objects. The id of a blob
// is the lowercase hex SHA-256 of its bytes; the media type sits next to it in
// "<id>.type". Concurrent writers of the same bytes are harmless.
class BlobStore {
 public:
  explicit BlobStore(std::filesystem::path dir);

  const std::filesystem::path& dir() const noexcept { return dir_; }

  // Throws InvalidArgument for empty bytes, IoError.
  std::string put(std::span<const std::uint8_t> bytes, const std::string& media_type) const;
  // Throws NotFound, IoError.
  Blob get(const std::string& id) const;
  bool contains(const std::string& id) const;

  static bool is_blob_id(const std::string& id) noexcept;

 private:
  std::filesystem::path dir_;
};

}  // namespace mirage
