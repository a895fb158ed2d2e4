#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mirage {

enum class ErrorCode {
  kInvalidArgument,
  kDimensionMismatch,
  kZeroVector,
  kNonFiniteInput,
  kDuplicateId,
  kNotFound,
  kEmptyStore,
  kInvalidK,
  kIoError,
  kBadMagic,
  kVersionUnsupported,
  kCorruptLength,
  kMetaVecMismatch,
  kDegenerateQuery,
  kMissingTerms,
  kEmptyText,
  kEmptyBlob,
  kBackendUnreachable,
  kBackendError,
  kEmptyResponse,
  kParseError,
  kMissingField,
  kDegenerateLabels,
  kAllRecordsSkipped,
  kIngestAborted,
};

std::string_view to_string(ErrorCode code) noexcept;

// Pipeline stage names attached to errors raised inside a query flow.
namespace stage {
inline constexpr std::string_view kEncodeQuery = "encode_query";
inline constexpr std::string_view kStage1 = "stage1";
inline constexpr std::string_view kEnrich = "enrich";
inline constexpr std::string_view kEncodeEnriched = "encode_enriched";
inline constexpr std::string_view kStage2 = "stage2";
inline constexpr std::string_view kSynthesize = "synthesize";
}  // namespace stage

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}
  Error(ErrorCode code, const std::string& message, std::string stage)
      : std::runtime_error(message), code_(code), stage_(std::move(stage)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& stage() const noexcept { return stage_; }

  // Same error, annotated with the pipeline stage it surfaced in. An existing
  // annotation is kept.
  Error with_stage(std::string_view stage) const {
    if (!stage_.empty()) return *this;
    return Error(code_, what(), std::string(stage));
  }

 private:
  ErrorCode code_;
  std::string stage_;
};

}  // namespace mirage
