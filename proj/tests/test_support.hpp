#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "mirage/backends.hpp"
#include "mirage/vector_store.hpp"

namespace test_support {

// Unique scratch directory, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("mirage-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Entry whose caption and image embeddings are both the mock embedding of the
// caption, i.e. a perfectly aligned encoder.
inline mirage::CatalogEntry aligned_entry(const std::string& id, const std::string& caption) {
  auto e = mirage::mock_embed(caption);
  return mirage::CatalogEntry{mirage::EntryMeta{id, caption, "img/" + id + ".png", "X-ray"}, e, e};
}

inline std::filesystem::path fixture_dir() { return MIRAGE_FIXTURE_DIR; }

}  // namespace test_support
