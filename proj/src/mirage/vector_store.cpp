#include "mirage/vector_store.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "mirage/error.hpp"

namespace mirage {

namespace fs = std::filesystem;

namespace {

constexpr std::uint8_t kMagic[4] = {0x4D, 0x49, 0x52, 0x47};

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
  }
}

template <typename T>
T get_le(std::span<const std::uint8_t> bytes, std::size_t offset) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    value |= static_cast<T>(bytes[offset + i]) << (8 * i);
  }
  return value;
}

void append_row(std::vector<float>& matrix, const Embedding& e) {
  for (double x : e.values()) matrix.push_back(static_cast<float>(x));
}

}  // namespace

VectorStore::VectorStore(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw Error(ErrorCode::kInvalidArgument, "store dimension must be positive");
}

void VectorStore::add(const CatalogEntry& entry) {
  if (entry.caption_embedding.dim() != dim_ || entry.image_embedding.dim() != dim_) {
    throw Error(ErrorCode::kDimensionMismatch,
                "entry '" + entry.meta.id + "' has embedding dimensions " +
                    std::to_string(entry.caption_embedding.dim()) + "/" +
                    std::to_string(entry.image_embedding.dim()) + ", store expects " +
                    std::to_string(dim_));
  }
  if (index_.contains(entry.meta.id)) {
    throw Error(ErrorCode::kDuplicateId, "duplicate entry id '" + entry.meta.id + "'");
  }
  index_.emplace(entry.meta.id, meta_.size());
  meta_.push_back(entry.meta);
  append_row(captions_, entry.caption_embedding);
  append_row(images_, entry.image_embedding);
}

std::optional<std::size_t> VectorStore::row_of(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const EntryMeta& VectorStore::get(const std::string& id) const {
  auto row = row_of(id);
  if (!row) throw Error(ErrorCode::kNotFound, "no entry with id '" + id + "'");
  return meta_[*row];
}

std::span<const float> VectorStore::matrix(Target target) const noexcept {
  return target == Target::kImages ? std::span<const float>(images_)
                                   : std::span<const float>(captions_);
}

std::vector<float>& VectorStore::matrix_for(Target target) noexcept {
  return target == Target::kImages ? images_ : captions_;
}

std::span<const float> VectorStore::row(Target target, std::size_t row) const {
  if (row >= size()) throw Error(ErrorCode::kNotFound, "row out of range");
  return matrix(target).subspan(row * dim_, dim_);
}

std::vector<SearchHit> VectorStore::top_k(std::span<const double> query, std::size_t k,
                                          Target target) const {
  if (empty()) throw Error(ErrorCode::kEmptyStore, "store is empty");
  if (k == 0) throw Error(ErrorCode::kInvalidK, "k must be at least 1");
  if (query.size() != dim_) {
    throw Error(ErrorCode::kDimensionMismatch, "query dimension " + std::to_string(query.size()) +
                                                   " does not match store dimension " +
                                                   std::to_string(dim_));
  }
  const double qn = l2_norm(query);
  if (!std::isfinite(qn)) throw Error(ErrorCode::kNonFiniteInput, "query has non-finite values");
  if (qn < kZeroNormEpsilon) throw Error(ErrorCode::kZeroVector, "query is a zero vector");

  const auto rows = matrix(target);
  std::vector<double> scores(size());
  for (std::size_t r = 0; r < size(); ++r) {
    const float* row = rows.data() + r * dim_;
    double acc = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) acc += static_cast<double>(row[i]) * query[i];
    scores[r] = std::clamp(acc / qn, -1.0, 1.0);
  }

  std::vector<std::size_t> order(size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t n = std::min(k, size());
  auto before = [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return meta_[a].id < meta_[b].id;
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(),
                    before);

  std::vector<SearchHit> hits;
  hits.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    hits.push_back(SearchHit{meta_[order[i]].id, scores[order[i]], i + 1});
  }
  return hits;
}

// --- persistence ---------------------------------------------------------

std::vector<std::uint8_t> encode_mvec(const MvecFile& file) {
  std::vector<std::uint8_t> out;
  out.reserve(kMvecHeaderSize + file.values.size() * 4);
  for (std::uint8_t b : kMagic) out.push_back(b);
  put_le<std::uint16_t>(out, kMvecVersion);
  out.push_back(static_cast<std::uint8_t>(file.kind));
  out.push_back(0);
  put_le<std::uint32_t>(out, file.dim);
  put_le<std::uint64_t>(out, file.count);
  for (float v : file.values) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    put_le<std::uint32_t>(out, bits);
  }
  return out;
}

MvecFile decode_mvec(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || !std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) {
    throw Error(ErrorCode::kBadMagic, "not a .mvec file (bad magic)");
  }
  if (bytes.size() < kMvecHeaderSize) {
    throw Error(ErrorCode::kCorruptLength, ".mvec header truncated");
  }
  const auto version = get_le<std::uint16_t>(bytes, 4);
  if (version != kMvecVersion) {
    throw Error(ErrorCode::kVersionUnsupported,
                ".mvec version " + std::to_string(version) + " is not supported");
  }
  const std::uint8_t kind = bytes[6];
  if (kind > 1) throw Error(ErrorCode::kBadMagic, ".mvec kind byte " + std::to_string(kind));

  MvecFile file;
  file.kind = static_cast<Target>(kind);
  file.dim = get_le<std::uint32_t>(bytes, 8);
  file.count = get_le<std::uint64_t>(bytes, 12);

  const std::uint64_t payload = bytes.size() - kMvecHeaderSize;
  // Guard the multiplication against overflow before comparing sizes.
  const bool fits = file.dim == 0 ? file.count == 0 || payload == 0
                                  : file.count <= payload / 4 / file.dim;
  if (file.dim == 0 || !fits || file.count * file.dim * 4 != payload) {
    throw Error(ErrorCode::kCorruptLength,
                ".mvec declares " + std::to_string(file.count) + " x " + std::to_string(file.dim) +
                    " values but carries " + std::to_string(payload) + " payload bytes");
  }
  file.values.resize(file.count * file.dim);
  for (std::size_t i = 0; i < file.values.size(); ++i) {
    const auto bits = get_le<std::uint32_t>(bytes, kMvecHeaderSize + 4 * i);
    std::memcpy(&file.values[i], &bits, sizeof bits);
  }
  return file;
}

std::vector<std::uint8_t> read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::kIoError, "read failed for '" + path.string() + "'");
  return bytes;
}

void write_file_bytes(const fs::path& path, std::span<const std::uint8_t> bytes) {
  // Write-then-rename keeps readers from ever seeing a partial file.
  std::ostringstream suffix;
  suffix << ".tmp." << std::hash<std::thread::id>{}(std::this_thread::get_id());
  fs::path tmp = path;
  tmp += suffix.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIoError, "cannot open '" + tmp.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::kIoError, "write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorCode::kIoError, "cannot move file into place at '" + path.string() + "'");
  }
}

void write_mvec(const fs::path& path, const MvecFile& file) {
  write_file_bytes(path, encode_mvec(file));
}

MvecFile read_mvec(const fs::path& path) { return decode_mvec(read_file_bytes(path)); }

void VectorStore::save(const fs::path& caption_vec, const fs::path& image_vec,
                       const fs::path& meta_path) const {
  for (Target t : {Target::kCaptions, Target::kImages}) {
    MvecFile file;
    file.kind = t;
    file.dim = static_cast<std::uint32_t>(dim_);
    file.count = size();
    const auto m = matrix(t);
    file.values.assign(m.begin(), m.end());
    write_mvec(t == Target::kCaptions ? caption_vec : image_vec, file);
  }

  std::string lines;
  for (const auto& m : meta_) {
    nlohmann::ordered_json j;
    j["id"] = m.id;
    j["caption"] = m.caption;
    j["image_ref"] = m.image_ref;
    j["modality"] = m.modality;
    lines += j.dump();
    lines += '\n';
  }
  write_file_bytes(meta_path, std::span(reinterpret_cast<const std::uint8_t*>(lines.data()),
                                        lines.size()));
}

VectorStore VectorStore::load(const fs::path& caption_vec, const fs::path& image_vec,
                              const fs::path& meta_path) {
  MvecFile caps = read_mvec(caption_vec);
  MvecFile imgs = read_mvec(image_vec);
  if (caps.kind != Target::kCaptions) {
    throw Error(ErrorCode::kBadMagic, "'" + caption_vec.string() + "' is not a caption .mvec");
  }
  if (imgs.kind != Target::kImages) {
    throw Error(ErrorCode::kBadMagic, "'" + image_vec.string() + "' is not an image .mvec");
  }
  if (caps.dim != imgs.dim || caps.count != imgs.count) {
    throw Error(ErrorCode::kMetaVecMismatch, "caption and image .mvec files disagree on shape");
  }

  std::ifstream in(meta_path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open '" + meta_path.string() + "'");
  std::vector<EntryMeta> meta;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      meta.push_back(EntryMeta{j.at("id").get<std::string>(), j.at("caption").get<std::string>(),
                               j.at("image_ref").get<std::string>(),
                               j.at("modality").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParseError,
                  meta_path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (meta.size() != caps.count) {
    throw Error(ErrorCode::kMetaVecMismatch,
                "metadata has " + std::to_string(meta.size()) + " rows, vectors have " +
                    std::to_string(caps.count));
  }

  VectorStore store(caps.dim);
  for (float v : caps.values) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kNonFiniteInput, "caption vectors not finite");
  }
  for (float v : imgs.values) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kNonFiniteInput, "image vectors not finite");
  }
  for (std::size_t i = 0; i < meta.size(); ++i) {
    if (!store.index_.emplace(meta[i].id, i).second) {
      throw Error(ErrorCode::kDuplicateId, "duplicate entry id '" + meta[i].id + "' in metadata");
    }
  }
  store.meta_ = std::move(meta);
  store.captions_ = std::move(caps.values);
  store.images_ = std::move(imgs.values);
  return store;
}

void VectorStore::save_dir(const fs::path& dir) const {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot create '" + dir.string() + "'");
  save(dir / store_files::kCaptionVec, dir / store_files::kImageVec, dir / store_files::kMeta);
}

VectorStore VectorStore::load_dir(const fs::path& dir) {
  return load(dir / store_files::kCaptionVec, dir / store_files::kImageVec,
              dir / store_files::kMeta);
}

}  // namespace mirage
