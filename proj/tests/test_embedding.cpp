#include <cmath>
#include <random>

#include "doctest.h"
#include "mirage/embedding.hpp"
#include "mirage/error.hpp"
#include "oracles.hpp"

using namespace mirage;

namespace {

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

TEST_CASE("normalize: 3-4-5 triangle") {
  const std::vector<double> v = {3.0, 4.0};
  auto e = normalize(v);
  CHECK(e[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(e[1] == doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("normalize: unit input is returned unchanged") {
  const std::vector<double> v = {1.0, 0.0, 0.0};
  auto e = normalize(v);
  CHECK(std::vector<double>(e.values().begin(), e.values().end()) == v);
}

TEST_CASE("normalize: errors") {
  CHECK(code_of([] { normalize(std::vector<double>{0.0, 0.0}); }) == ErrorCode::kZeroVector);
  CHECK(code_of([] { normalize(std::vector<double>{1.0, NAN}); }) == ErrorCode::kNonFiniteInput);
  CHECK(code_of([] { normalize(std::vector<double>{1.0, INFINITY}); }) == ErrorCode::kNonFiniteInput);
  CHECK(code_of([] { normalize(std::vector<double>{1.0, 2.0}, 3); }) == ErrorCode::kDimensionMismatch);
}

TEST_CASE("normalize: result is unit and idempotent on random vectors") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t dim = 1 + rng() % 128;
    auto raw = oracle::random_raw(rng, dim);
    auto once = normalize(raw);
    CHECK(std::abs(l2_norm(once.values()) - 1.0) < 1e-6);
    auto twice = normalize(once.values());
    CHECK(once == twice);
  }
}

TEST_CASE("cosine: examples") {
  const std::vector<double> x = {1.0, 0.0};
  const std::vector<double> y = {0.0, 1.0};
  CHECK(cosine(x, x) == 1.0);
  CHECK(cosine(x, y) == 0.0);
  const std::vector<double> a = {0.6, 0.8};
  const std::vector<double> b = {0.8, 0.6};
  CHECK(cosine(a, b) == doctest::Approx(0.96).epsilon(1e-12));
}

TEST_CASE("cosine: errors") {
  CHECK(code_of([] { cosine(std::vector<double>{1, 0}, std::vector<double>{1, 0, 0}); }) ==
        ErrorCode::kDimensionMismatch);
  CHECK(code_of([] { cosine(std::vector<double>{0, 0}, std::vector<double>{1, 0}); }) ==
        ErrorCode::kZeroVector);
}

TEST_CASE("cosine: symmetric, self-similarity one, within [-1, 1]") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t dim = 1 + rng() % 64;
    auto u = normalize(oracle::random_raw(rng, dim));
    auto v = normalize(oracle::random_raw(rng, dim));
    CHECK(cosine(u, v) == cosine(v, u));
    CHECK(std::abs(cosine(u, u) - 1.0) <= 1e-6);
    CHECK(std::abs(cosine(u, v)) <= 1.0);
  }
  // Antiparallel vectors clamp at exactly -1.
  const std::vector<double> p = {0.1, 0.2, 0.3};
  const std::vector<double> n = {-0.1, -0.2, -0.3};
  CHECK(cosine(p, n) >= -1.0);
}

TEST_CASE("Embedding::from_unit rejects non-unit input") {
  CHECK_NOTHROW(Embedding::from_unit({0.6, 0.8}));
  CHECK(code_of([] { Embedding::from_unit({3.0, 4.0}); }) == ErrorCode::kInvalidArgument);
}
