#include <algorithm>
#include <atomic>
#include <cstring>
#include <random>
#include <thread>

#include "doctest.h"
#include "mirage/error.hpp"
#include "mirage/vector_store.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace mirage;
using test_support::TempDir;

namespace {

CatalogEntry entry(const std::string& id, std::vector<double> caption, std::vector<double> image) {
  return CatalogEntry{EntryMeta{id, "caption " + id, "img/" + id, "CT"}, normalize(caption),
                      normalize(image)};
}

VectorStore random_store(std::mt19937_64& rng, std::size_t n, std::size_t dim) {
  VectorStore store(dim);
  for (std::size_t i = 0; i < n; ++i) {
    auto c = oracle::random_unit(rng, dim);
    auto im = oracle::random_unit(rng, dim);
    store.add(CatalogEntry{EntryMeta{"e" + std::to_string(rng() % 1000000) + "-" + std::to_string(i),
                                     "c", "r", "m"},
                           normalize(c), normalize(im)});
  }
  return store;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kInvalidArgument;
}

}  // namespace

TEST_CASE("add_entry: size, lookup and errors") {
  VectorStore store(2);
  store.add(entry("A", {1, 0}, {1, 0}));
  CHECK(store.size() == 1);
  CHECK(store.get("A").caption == "caption A");
  CHECK(code_of([&] { store.add(entry("A", {1, 0}, {0, 1})); }) == ErrorCode::kDuplicateId);
  CHECK(code_of([&] { store.add(entry("B", {1, 0, 0}, {0, 1, 0})); }) == ErrorCode::kDimensionMismatch);
  CHECK(code_of([&] { store.get("missing"); }) == ErrorCode::kNotFound);
  CHECK(store.size() == 1);
}

TEST_CASE("add_entry: 1000 random entries are all retrievable") {
  std::mt19937_64 rng(3);
  VectorStore store(16);
  for (int i = 0; i < 1000; ++i) {
    store.add(entry("id-" + std::to_string(i), oracle::random_raw(rng, 16), oracle::random_raw(rng, 16)));
  }
  CHECK(store.size() == 1000);
  for (int i = 0; i < 1000; ++i) CHECK(store.row_of("id-" + std::to_string(i)) == std::size_t(i));
}

TEST_CASE("top_k: examples") {
  VectorStore store(2);
  store.add(entry("A", {0, 1}, {1, 0}));
  store.add(entry("B", {1, 0}, {0, 1}));
  const std::vector<double> q = {1, 0};

  auto hits = store.top_k(q, 1, Target::kImages);
  REQUIRE(hits.size() == 1);
  CHECK(hits[0] == SearchHit{"A", 1.0, 1});

  auto clamped = store.top_k(q, 5, Target::kImages);
  CHECK(clamped.size() == 2);
  CHECK(clamped[1].entry_id == "B");
  CHECK(clamped[1].rank == 2);

  // Same query against the caption embeddings flips the winner.
  CHECK(store.top_k(q, 1, Target::kCaptions)[0].entry_id == "B");
}

TEST_CASE("top_k: errors") {
  VectorStore empty(2);
  const std::vector<double> q = {1, 0};
  CHECK(code_of([&] { empty.top_k(q, 1, Target::kImages); }) == ErrorCode::kEmptyStore);
  VectorStore store(2);
  store.add(entry("A", {1, 0}, {1, 0}));
  CHECK(code_of([&] { store.top_k(q, 0, Target::kImages); }) == ErrorCode::kInvalidK);
  CHECK(code_of([&] { store.top_k(std::vector<double>{1, 0, 0}, 1, Target::kImages); }) ==
        ErrorCode::kDimensionMismatch);
  CHECK(code_of([&] { store.top_k(std::vector<double>{0, 0}, 1, Target::kImages); }) ==
        ErrorCode::kZeroVector);
}

TEST_CASE("top_k: ties are broken by ascending id, repeatably") {
  VectorStore store(2);
  for (const char* id : {"delta", "alpha", "charlie", "bravo"}) store.add(entry(id, {1, 1}, {1, 1}));
  const std::vector<double> q = {1, 0};
  for (int rep = 0; rep < 5; ++rep) {
    auto hits = store.top_k(q, 4, Target::kImages);
    std::vector<std::string> ids;
    for (auto& h : hits) ids.push_back(h.entry_id);
    CHECK(ids == std::vector<std::string>{"alpha", "bravo", "charlie", "delta"});
  }
}

TEST_CASE("top_k: matches brute-force scan on random stores") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 1 + rng() % 300;
    const std::size_t dim = 1 + rng() % 32;
    auto store = random_store(rng, n, dim);
    auto q = oracle::random_raw(rng, dim);
    const std::size_t k = 1 + rng() % (n + 3);
    auto hits = store.top_k(q, k, Target::kImages);

    std::vector<std::string> ids;
    for (const auto& m : store.all_meta()) ids.push_back(m.id);
    auto m = store.matrix(Target::kImages);
    auto expected = oracle::brute_force_rank(ids, std::vector<float>(m.begin(), m.end()), dim, q);
    REQUIRE(hits.size() == std::min(k, n));
    for (std::size_t i = 0; i < hits.size(); ++i) {
      CHECK(hits[i].entry_id == expected[i].first);
      CHECK(hits[i].similarity == doctest::Approx(expected[i].second).epsilon(1e-12));
      CHECK(hits[i].rank == i + 1);
    }
  }
}

TEST_CASE("top_k: ranking invariant under positive scaling of the query") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t dim = 2 + rng() % 32;
    auto store = random_store(rng, 200, dim);
    auto q = oracle::random_raw(rng, dim);
    auto scaled = q;
    const double c = std::uniform_real_distribution<double>(0.01, 100.0)(rng);
    for (double& x : scaled) x *= c;
    auto a = store.top_k(q, 200, Target::kCaptions);
    auto b = store.top_k(scaled, 200, Target::kCaptions);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].entry_id == b[i].entry_id);
  }
}

TEST_CASE("persistence: empty store keeps its dimension") {
  TempDir dir;
  VectorStore store(7);
  store.save_dir(dir.path());
  auto loaded = VectorStore::load_dir(dir.path());
  CHECK(loaded.size() == 0);
  CHECK(loaded.dim() == 7);
}

TEST_CASE("persistence: 100-entry round trip is bit-exact") {
  TempDir dir;
  std::mt19937_64 rng(6);
  auto store = random_store(rng, 100, 24);
  store.save_dir(dir / "a");
  auto loaded = VectorStore::load_dir(dir / "a");
  REQUIRE(loaded.size() == 100);
  CHECK(loaded.all_meta() == store.all_meta());
  for (Target t : {Target::kCaptions, Target::kImages}) {
    auto x = store.matrix(t);
    auto y = loaded.matrix(t);
    REQUIRE(x.size() == y.size());
    CHECK(std::memcmp(x.data(), y.data(), x.size() * sizeof(float)) == 0);
  }
  loaded.save_dir(dir / "b");
  for (const char* f : {store_files::kCaptionVec, store_files::kImageVec, store_files::kMeta}) {
    CHECK(read_file_bytes(dir / "a" / f) == read_file_bytes(dir / "b" / f));
  }
}

TEST_CASE("mvec: header layout is exact") {
  MvecFile f;
  f.kind = Target::kImages;
  f.dim = 2;
  f.count = 1;
  f.values = {1.0f, -2.0f};
  auto bytes = encode_mvec(f);
  const std::vector<std::uint8_t> header = {'M', 'I', 'R', 'G', 1, 0, 1, 0, 2, 0, 0, 0,
                                            1, 0, 0, 0, 0, 0, 0, 0};
  REQUIRE(bytes.size() == 28);
  CHECK(std::equal(header.begin(), header.end(), bytes.begin()));
  // 1.0f = 0x3F800000, -2.0f = 0xC0000000, little-endian.
  const std::vector<std::uint8_t> payload = {0, 0, 0x80, 0x3F, 0, 0, 0, 0xC0};
  CHECK(std::equal(payload.begin(), payload.end(), bytes.begin() + 20));
}

TEST_CASE("mvec: format errors") {
  MvecFile f;
  f.dim = 3;
  f.count = 2;
  f.values = {1, 2, 3, 4, 5, 6};
  auto good = encode_mvec(f);

  auto truncated = good;
  truncated.pop_back();
  CHECK(code_of([&] { decode_mvec(truncated); }) == ErrorCode::kCorruptLength);

  auto bad_magic = good;
  bad_magic[0] = 'X';
  CHECK(code_of([&] { decode_mvec(bad_magic); }) == ErrorCode::kBadMagic);

  auto bad_version = good;
  bad_version[4] = 2;
  CHECK(code_of([&] { decode_mvec(bad_version); }) == ErrorCode::kVersionUnsupported);

  auto huge_count = good;
  huge_count[19] = 0x7F;
  CHECK(code_of([&] { decode_mvec(huge_count); }) == ErrorCode::kCorruptLength);

  CHECK(code_of([&] { decode_mvec(std::vector<std::uint8_t>{'M', 'I', 'R', 'G', 1}); }) ==
        ErrorCode::kCorruptLength);
}

TEST_CASE("load: truncated vector file and mismatched metadata") {
  TempDir dir;
  std::mt19937_64 rng(7);
  auto store = random_store(rng, 5, 4);
  store.save_dir(dir.path());

  SUBCASE("truncated vec file") {
    auto bytes = read_file_bytes(dir / store_files::kImageVec);
    bytes.resize(bytes.size() - 3);
    write_file_bytes(dir / store_files::kImageVec, bytes);
    CHECK(code_of([&] { VectorStore::load_dir(dir.path()); }) == ErrorCode::kCorruptLength);
  }
  SUBCASE("metadata row count differs") {
    auto meta = read_file_bytes(dir / store_files::kMeta);
    std::string text(meta.begin(), meta.end());
    text = text.substr(0, text.find('\n') + 1);
    write_file_bytes(dir / store_files::kMeta, std::vector<std::uint8_t>(text.begin(), text.end()));
    CHECK(code_of([&] { VectorStore::load_dir(dir.path()); }) == ErrorCode::kMetaVecMismatch);
  }
  SUBCASE("kinds swapped") {
    std::filesystem::rename(dir / store_files::kImageVec, dir / "tmp");
    std::filesystem::rename(dir / store_files::kCaptionVec, dir / store_files::kImageVec);
    std::filesystem::rename(dir / "tmp", dir / store_files::kCaptionVec);
    CHECK(code_of([&] { VectorStore::load_dir(dir.path()); }) == ErrorCode::kBadMagic);
  }
  SUBCASE("missing file") {
    std::filesystem::remove(dir / store_files::kCaptionVec);
    CHECK(code_of([&] { VectorStore::load_dir(dir.path()); }) == ErrorCode::kIoError);
  }
}

TEST_CASE("concurrent readers see consistent results") {
  std::mt19937_64 rng(8);
  auto store = random_store(rng, 500, 16);
  auto q = oracle::random_raw(rng, 16);
  const auto expected = store.top_k(q, 10, Target::kImages);
  std::vector<std::thread> threads;
  std::atomic<int> mismatches{0};
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&] {
      for (int i = 0; i < 50; ++i) {
        if (store.top_k(q, 10, Target::kImages) != expected) ++mismatches;
      }
    });
  }
  for (auto& t : threads) t.join();
  CHECK(mismatches == 0);
}
