#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mirage/embedding.hpp"

namespace mirage {

inline constexpr std::size_t kDefaultDim = 768;

// Which of an entry's two embeddings a search compares against.
enum class Target : std::uint8_t { kCaptions = 0, kImages = 1 };

struct EntryMeta {
  std::string id;
  std::string caption;
  std::string image_ref;
  std::string modality;

  friend bool operator==(const EntryMeta&, const EntryMeta&) = default;
};

struct CatalogEntry {
  EntryMeta meta;
  Embedding caption_embedding;
  Embedding image_embedding;
};

struct SearchHit {
  std::string entry_id;
  double similarity = 0.0;
  std::size_t rank = 0;  // 1-based

  friend bool operator==(const SearchHit&, const SearchHit&) = default;
};

// Fixed-dimension store of catalog entries with exact cosine search.
//
// Rows are kept as binary32, row-major, one matrix per target. Const member
// functions never mutate and may be called from any number of threads; add()
// and assignment need exclusive access.
class VectorStore {
 public:
  explicit VectorStore(std::size_t dim = kDefaultDim);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return meta_.size(); }
  bool empty() const noexcept { return meta_.empty(); }

  // Throws DuplicateId, DimensionMismatch.
  void add(const CatalogEntry& entry);

  const EntryMeta& meta(std::size_t row) const { return meta_.at(row); }
  const std::vector<EntryMeta>& all_meta() const noexcept { return meta_; }
  std::optional<std::size_t> row_of(const std::string& id) const;
  // Throws NotFound.
  const EntryMeta& get(const std::string& id) const;

  std::span<const float> row(Target target, std::size_t row) const;
  std::span<const float> matrix(Target target) const noexcept;

  // Exact top-k by cosine against every row of `target`. The query need not
  // be normalized: scores are q.row / |q| with stored rows taken as unit.
  // Hits are ordered by similarity descending, then id ascending.
  // Throws EmptyStore, InvalidK, DimensionMismatch, ZeroVector.
  std::vector<SearchHit> top_k(std::span<const double> query, std::size_t k,
                               Target target) const;
  std::vector<SearchHit> top_k(const Embedding& query, std::size_t k, Target target) const {
    return top_k(query.values(), k, target);
  }

  // Persist as two .mvec files plus a JSON Lines metadata file.
  void save(const std::filesystem::path& caption_vec, const std::filesystem::path& image_vec,
            const std::filesystem::path& meta_path) const;
  static VectorStore load(const std::filesystem::path& caption_vec,
                          const std::filesystem::path& image_vec,
                          const std::filesystem::path& meta_path);

  // Conventional layout inside a store directory.
  void save_dir(const std::filesystem::path& dir) const;
  static VectorStore load_dir(const std::filesystem::path& dir);

 private:
  std::vector<float>& matrix_for(Target target) noexcept;

  std::size_t dim_;
  std::vector<EntryMeta> meta_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<float> captions_;
  std::vector<float> images_;
};

namespace store_files {
inline constexpr const char* kMeta = "meta.jsonl";
inline constexpr const char* kCaptionVec = "captions.mvec";
inline constexpr const char* kImageVec = "images.mvec";
inline constexpr const char* kBlobDir = "blobs";
inline constexpr const char* kBuildReport = "build_report.json";
}  // namespace store_files

// Raw .mvec I/O.
//
//   0..3   magic "MIRG"
//   4..5   version, u16 LE (= 1)
//   6      kind, u8 (0 captions, 1 images)
//   7      reserved (= 0)
//   8..11  dim, u32 LE
//   12..19 count, u64 LE
//   20..   count * dim binary32 LE, row-major
struct MvecFile {
  Target kind = Target::kCaptions;
  std::uint32_t dim = 0;
  std::uint64_t count = 0;
  std::vector<float> values;
};

inline constexpr std::uint16_t kMvecVersion = 1;
inline constexpr std::size_t kMvecHeaderSize = 20;

std::vector<std::uint8_t> encode_mvec(const MvecFile& file);
// Throws BadMagic, VersionUnsupported, CorruptLength.
MvecFile decode_mvec(std::span<const std::uint8_t> bytes);

void write_mvec(const std::filesystem::path& path, const MvecFile& file);
MvecFile read_mvec(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace mirage
