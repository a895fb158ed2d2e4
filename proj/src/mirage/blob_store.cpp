#include "mirage/blob_store.hpp"

#include <algorithm>

#include "mirage/error.hpp"
#include "mirage/vector_store.hpp"

namespace mirage {

namespace fs = std::filesystem;

BlobStore::BlobStore(fs::path dir) : dir_(std::move(dir)) {}

bool BlobStore::is_blob_id(const std::string& id) noexcept {
  return id.size() == 64 && std::all_of(id.begin(), id.end(), [](char c) {
           return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
         });
}

std::string BlobStore::put(std::span<const std::uint8_t> bytes,
                           const std::string& media_type) const {
  if (bytes.empty()) throw Error(ErrorCode::kInvalidArgument, "cannot store an empty blob");
  const std::string id = sha256_hex(bytes);
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot create blob directory '" + dir_.string() + "'");

  const fs::path data = dir_ / id;
  if (!fs::exists(data)) write_file_bytes(data, bytes);
  const fs::path type = dir_ / (id + ".type");
  if (!fs::exists(type)) {
    const std::string mt = media_type.empty() ? sniff_media_type(bytes) : media_type;
    write_file_bytes(type, as_bytes(mt));
  }
  return id;
}

bool BlobStore::contains(const std::string& id) const {
  return is_blob_id(id) && fs::exists(dir_ / id);
}

Blob BlobStore::get(const std::string& id) const {
  if (!contains(id)) throw Error(ErrorCode::kNotFound, "no blob with id '" + id + "'");
  Blob blob;
  blob.bytes = read_file_bytes(dir_ / id);
  const fs::path type = dir_ / (id + ".type");
  if (fs::exists(type)) {
    auto t = read_file_bytes(type);
    blob.media_type.assign(t.begin(), t.end());
  } else {
    blob.media_type = sniff_media_type(blob.bytes);
  }
  return blob;
}

}  // namespace mirage
