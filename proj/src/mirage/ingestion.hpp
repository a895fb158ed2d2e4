#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mirage/backends.hpp"
#include "mirage/blob_store.hpp"
#include "mirage/vector_store.hpp"

namespace mirage {

struct CatalogRecord {
  std::string id;
  std::string caption;
  std::string image_path;  // resolved against the catalog's directory
  std::string modality = "unknown";
  std::size_t line = 0;
};

// JSON Lines, or CSV with header "id,caption,image_path[,modality]". The
// format follows the extension (.csv / .jsonl / .json) and otherwise the
// first non-blank character. Throws ParseError, DuplicateId, MissingField,
// IoError.
std::vector<CatalogRecord> parse_catalog(const std::filesystem::path& path);

// RFC 4180 records: quoted fields may hold commas, doubled quotes and newlines.
// Each row carries the line number it starts on.
struct CsvRow {
  std::vector<std::string> fields;
  std::size_t line = 0;
};
std::vector<CsvRow> parse_csv(const std::string& text);

enum class MissingImagePolicy { kSkip, kFail };

struct IngestOptions {
  std::size_t batch_size = 32;
  MissingImagePolicy on_missing_image = MissingImagePolicy::kSkip;
  std::optional<std::size_t> limit;  // keep only the first N records
  std::size_t parallelism = 1;       // batches embedded concurrently
};

struct SkippedRecord {
  std::string id;
  std::size_t line = 0;
  std::string reason;
};

struct BuildReport {
  std::string catalog;
  std::size_t records_in_catalog = 0;
  std::size_t records_considered = 0;
  std::optional<std::size_t> limit;
  std::size_t entries = 0;
  std::vector<SkippedRecord> skipped;
  std::vector<std::pair<std::string, std::string>> image_sources;  // id -> original path
  std::size_t dim = 0;
  std::string backend_mode;
  std::size_t batch_size = 0;
  std::string status = "ok";
  std::string error;
};

std::string build_report_json(const BuildReport& report);

struct BuildResult {
  VectorStore store;
  BuildReport report;
};

// Embeds captions and images in batches and assembles a store in record order.
// Images are copied into `blobs` and referenced as "blobs/<sha256>".
// Unreadable images are skipped or abort the build per options. A backend
// failure aborts; the error message states how far the build got.
// Throws AllRecordsSkipped, InvalidArgument (no records), backend errors.
BuildResult build_store(const std::vector<CatalogRecord>& records, const Backends& backends,
                        const BlobStore& blobs, const IngestOptions& options);

// parse_catalog + build_store + save into `out_dir` (meta.jsonl, captions.mvec,
// images.mvec, blobs/, build_report.json). The report is written on abort too.
BuildReport ingest_catalog(const std::filesystem::path& catalog, const std::filesystem::path& out_dir,
                           const Backends& backends, const IngestOptions& options);

}  // namespace mirage
