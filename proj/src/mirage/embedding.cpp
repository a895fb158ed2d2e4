#include "mirage/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mirage/error.hpp"

namespace mirage {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kZeroVector: return "ZeroVector";
    case ErrorCode::kNonFiniteInput: return "NonFiniteInput";
    case ErrorCode::kDuplicateId: return "DuplicateId";
    case ErrorCode::kNotFound: return "NotFound";
    case ErrorCode::kEmptyStore: return "EmptyStore";
    case ErrorCode::kInvalidK: return "InvalidK";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kBadMagic: return "BadMagic";
    case ErrorCode::kVersionUnsupported: return "VersionUnsupported";
    case ErrorCode::kCorruptLength: return "CorruptLength";
    case ErrorCode::kMetaVecMismatch: return "MetaVecMismatch";
    case ErrorCode::kDegenerateQuery: return "DegenerateQuery";
    case ErrorCode::kMissingTerms: return "MissingTerms";
    case ErrorCode::kEmptyText: return "EmptyText";
    case ErrorCode::kEmptyBlob: return "EmptyBlob";
    case ErrorCode::kBackendUnreachable: return "BackendUnreachable";
    case ErrorCode::kBackendError: return "BackendError";
    case ErrorCode::kEmptyResponse: return "EmptyResponse";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kMissingField: return "MissingField";
    case ErrorCode::kDegenerateLabels: return "DegenerateLabels";
    case ErrorCode::kAllRecordsSkipped: return "AllRecordsSkipped";
    case ErrorCode::kIngestAborted: return "IngestAborted";
  }
  return "Unknown";
}

Embedding Embedding::from_unit(std::vector<double> values) {
  const double n = l2_norm(values);
  if (!std::isfinite(n)) throw Error(ErrorCode::kNonFiniteInput, "embedding has non-finite values");
  if (std::abs(n - 1.0) > kUnitNormTolerance) {
    throw Error(ErrorCode::kInvalidArgument,
                "embedding is not unit-norm (norm " + std::to_string(n) + ")");
  }
  return Embedding(std::move(values));
}

double l2_norm(std::span<const double> v) noexcept { return std::sqrt(dot(v, v)); }

double dot(std::span<const double> u, std::span<const double> v) noexcept {
  double acc = 0.0;
  const std::size_t n = std::min(u.size(), v.size());
  for (std::size_t i = 0; i < n; ++i) acc += u[i] * v[i];
  return acc;
}

Embedding normalize(std::span<const double> raw) {
  if (raw.empty()) throw Error(ErrorCode::kDimensionMismatch, "cannot normalize an empty vector");
  for (double x : raw) {
    if (!std::isfinite(x)) throw Error(ErrorCode::kNonFiniteInput, "vector has non-finite values");
  }
  const double n = l2_norm(raw);
  if (n < kZeroNormEpsilon) throw Error(ErrorCode::kZeroVector, "cannot normalize a zero vector");
  std::vector<double> out(raw.begin(), raw.end());
  if (std::abs(n - 1.0) > 1e-12) {
    for (double& x : out) x /= n;
  }
  return Embedding(std::move(out));
}

Embedding normalize(std::span<const float> raw) {
  std::vector<double> widened(raw.begin(), raw.end());
  return normalize(std::span<const double>(widened));
}

Embedding normalize(std::span<const double> raw, std::size_t expected_dim) {
  if (raw.size() != expected_dim) {
    throw Error(ErrorCode::kDimensionMismatch, "expected dimension " + std::to_string(expected_dim) +
                                                   ", got " + std::to_string(raw.size()));
  }
  return normalize(raw);
}

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "cosine of vectors with dimensions " +
                                                   std::to_string(u.size()) + " and " +
                                                   std::to_string(v.size()));
  }
  const double nu = l2_norm(u);
  const double nv = l2_norm(v);
  if (nu < kZeroNormEpsilon || nv < kZeroNormEpsilon) {
    throw Error(ErrorCode::kZeroVector, "cosine of a zero vector");
  }
  return std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0);
}

}  // namespace mirage
