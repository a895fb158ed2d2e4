#include "mirage/ingestion.hpp"

#include <algorithm>
#include <fstream>
#include <future>
#include <sstream>
#include <unordered_map>

#include "json.hpp"
#include "mirage/error.hpp"
#include "mirage/query_algebra.hpp"

namespace mirage {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::vector<CsvRow> parse_csv(const std::string& text) {
  std::vector<CsvRow> rows;
  CsvRow row;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t line = 1;
  row.line = 1;

  auto end_field = [&] {
    row.fields.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    const bool blank = row.fields.size() == 1 && row.fields[0].empty();
    if (!blank) rows.push_back(std::move(row));
    row = CsvRow{};
    row.line = line;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (field_started || !field.empty()) {
          throw Error(ErrorCode::kParseError,
                      "line " + std::to_string(line) + ": stray quote inside unquoted field");
        }
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        break;
      case '\n':
        ++line;
        end_row();
        break;
      default:
        field.push_back(c);
        field_started = true;
    }
  }
  if (in_quotes) {
    throw Error(ErrorCode::kParseError, "line " + std::to_string(row.line) + ": unterminated quote");
  }
  if (field_started || !field.empty() || !row.fields.empty()) end_row();
  return rows;
}

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open catalog '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool looks_like_csv(const fs::path& path, const std::string& text) {
  const std::string ext = path.extension().string();
  if (ext == ".csv") return true;
  if (ext == ".jsonl" || ext == ".json" || ext == ".ndjson") return false;
  const auto first = text.find_first_not_of(" \t\r\n");
  return first != std::string::npos && text[first] != '{';
}

std::string resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_relative() ? (base / path).string() : p;
}

std::vector<CatalogRecord> records_from_csv(const std::string& text, const fs::path& base) {
  auto rows = parse_csv(text);
  if (rows.empty()) return {};
  std::vector<std::string> header = rows.front().fields;
  for (auto& h : header) h = trim(h);
  auto column = [&](const std::string& name) -> std::optional<std::size_t> {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto id_col = column("id");
  const auto cap_col = column("caption");
  const auto img_col = column("image_path");
  const auto mod_col = column("modality");
  if (!id_col || !cap_col || !img_col) {
    throw Error(ErrorCode::kMissingField, "line 1: CSV header must contain id,caption,image_path");
  }

  std::vector<CatalogRecord> records;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    auto get = [&](std::size_t col, const char* name) -> std::string {
      if (col >= row.fields.size() || trim(row.fields[col]).empty()) {
        throw Error(ErrorCode::kMissingField,
                    "line " + std::to_string(row.line) + ": missing field '" + name + "'");
      }
      return row.fields[col];
    };
    CatalogRecord rec;
    rec.line = row.line;
    rec.id = trim(get(*id_col, "id"));
    rec.caption = get(*cap_col, "caption");
    rec.image_path = resolve(base, trim(get(*img_col, "image_path")));
    if (mod_col && *mod_col < row.fields.size() && !trim(row.fields[*mod_col]).empty()) {
      rec.modality = trim(row.fields[*mod_col]);
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<CatalogRecord> records_from_jsonl(const std::string& text, const fs::path& base) {
  std::vector<CatalogRecord> records;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kParseError, "line " + std::to_string(line_no) + ": " + e.what());
    }
    auto get = [&](const char* name, bool required) -> std::string {
      if (!j.is_object() || !j.contains(name) || j[name].is_null()) {
        if (!required) return {};
        throw Error(ErrorCode::kMissingField,
                    "line " + std::to_string(line_no) + ": missing field '" + name + "'");
      }
      if (!j[name].is_string()) {
        throw Error(ErrorCode::kParseError,
                    "line " + std::to_string(line_no) + ": field '" + name + "' must be a string");
      }
      std::string v = j[name].get<std::string>();
      if (required && trim(v).empty()) {
        throw Error(ErrorCode::kMissingField,
                    "line " + std::to_string(line_no) + ": empty field '" + name + "'");
      }
      return v;
    };
    CatalogRecord rec;
    rec.line = line_no;
    rec.id = trim(get("id", true));
    rec.caption = get("caption", true);
    rec.image_path = resolve(base, trim(get("image_path", true)));
    const std::string modality = trim(get("modality", false));
    if (!modality.empty()) rec.modality = modality;
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace

std::vector<CatalogRecord> parse_catalog(const fs::path& path) {
  const std::string text = read_text(path);
  const fs::path base = path.parent_path();
  auto records = looks_like_csv(path, text) ? records_from_csv(text, base)
                                            : records_from_jsonl(text, base);
  std::unordered_map<std::string, std::size_t> seen;
  for (const auto& r : records) {
    auto [it, inserted] = seen.emplace(r.id, r.line);
    if (!inserted) {
      throw Error(ErrorCode::kDuplicateId, "duplicate id '" + r.id + "' on lines " +
                                               std::to_string(it->second) + " and " +
                                               std::to_string(r.line));
    }
  }
  return records;
}

std::string build_report_json(const BuildReport& r) {
  nlohmann::ordered_json j;
  j["status"] = r.status;
  if (!r.error.empty()) j["error"] = r.error;
  j["catalog"] = r.catalog;
  j["records_in_catalog"] = r.records_in_catalog;
  j["limit"] = r.limit ? nlohmann::ordered_json(*r.limit) : nlohmann::ordered_json(nullptr);
  j["records_considered"] = r.records_considered;
  j["entries"] = r.entries;
  j["skip_count"] = r.skipped.size();
  auto skipped = nlohmann::ordered_json::array();
  for (const auto& s : r.skipped) {
    skipped.push_back({{"id", s.id}, {"line", s.line}, {"reason", s.reason}});
  }
  j["skipped"] = std::move(skipped);
  j["dim"] = r.dim;
  j["backend_mode"] = r.backend_mode;
  j["batch_size"] = r.batch_size;
  auto sources = nlohmann::ordered_json::array();
  for (const auto& [id, path] : r.image_sources) sources.push_back({{"id", id}, {"source", path}});
  j["image_sources"] = std::move(sources);
  return j.dump(2) + "\n";
}

namespace {

struct EmbeddedRecord {
  bool skipped = false;
  std::string skip_reason;
  std::string blob_id;
  Embedding caption;
  Embedding image;
};

std::vector<EmbeddedRecord> embed_batch(std::span<const CatalogRecord> batch,
                                        const Backends& backends, const BlobStore& blobs,
                                        MissingImagePolicy policy) {
  std::vector<EmbeddedRecord> out(batch.size());
  std::vector<std::string> captions;
  std::vector<Bytes> images;
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    Bytes bytes;
    std::string reason;
    try {
      bytes = read_file_bytes(batch[i].image_path);
      if (bytes.empty()) reason = "image file is empty: " + batch[i].image_path;
    } catch (const Error& e) {
      reason = std::string("unreadable image: ") + e.what();
    }
    if (!reason.empty()) {
      if (policy == MissingImagePolicy::kFail) {
        throw Error(ErrorCode::kIoError, "record '" + batch[i].id + "' (line " +
                                             std::to_string(batch[i].line) + "): " + reason);
      }
      out[i].skipped = true;
      out[i].skip_reason = reason;
      continue;
    }
    out[i].blob_id = blobs.put(bytes, sniff_media_type(bytes));
    captions.push_back(batch[i].caption);
    images.push_back(std::move(bytes));
    kept.push_back(i);
  }
  if (kept.empty()) return out;
  auto caption_embeddings = backends.encode_text(captions);
  auto image_embeddings = backends.encode_image(images);
  for (std::size_t j = 0; j < kept.size(); ++j) {
    out[kept[j]].caption = std::move(caption_embeddings[j]);
    out[kept[j]].image = std::move(image_embeddings[j]);
  }
  return out;
}

}  // namespace

BuildResult build_store(const std::vector<CatalogRecord>& all_records, const Backends& backends,
                        const BlobStore& blobs, const IngestOptions& options) {
  if (options.batch_size == 0) throw Error(ErrorCode::kInvalidArgument, "batch size must be positive");
  std::span<const CatalogRecord> records(all_records);
  if (options.limit) records = records.first(std::min(*options.limit, records.size()));
  if (records.empty()) throw Error(ErrorCode::kInvalidArgument, "no catalog records to ingest");

  BuildResult result{VectorStore(backends.dim()), {}};
  BuildReport& report = result.report;
  report.records_in_catalog = all_records.size();
  report.records_considered = records.size();
  report.limit = options.limit;
  report.dim = backends.dim();
  report.backend_mode = std::string(to_string(backends.mode()));
  report.batch_size = options.batch_size;

  const std::size_t n_batches = (records.size() + options.batch_size - 1) / options.batch_size;
  const std::size_t parallelism = std::max<std::size_t>(1, options.parallelism);
  std::vector<std::vector<EmbeddedRecord>> embedded(n_batches);

  std::size_t done = 0;
  try {
    for (std::size_t wave = 0; wave < n_batches; wave += parallelism) {
      const std::size_t wave_end = std::min(n_batches, wave + parallelism);
      std::vector<std::future<std::vector<EmbeddedRecord>>> futures;
      for (std::size_t b = wave; b < wave_end; ++b) {
        const std::size_t start = b * options.batch_size;
        auto batch = records.subspan(start, std::min(options.batch_size, records.size() - start));
        futures.push_back(std::async(parallelism == 1 ? std::launch::deferred : std::launch::async,
                                     [batch, &backends, &blobs, &options] {
                                       return embed_batch(batch, backends, blobs,
                                                          options.on_missing_image);
                                     }));
      }
      std::exception_ptr failure;
      for (std::size_t b = wave; b < wave_end; ++b) {
        try {
          embedded[b] = futures[b - wave].get();
          if (!failure) done += embedded[b].size();
        } catch (...) {
          if (!failure) failure = std::current_exception();
        }
      }
      if (failure) std::rethrow_exception(failure);
    }
  } catch (const Error& e) {
    throw Error(e.code(), std::string(e.what()) + " (aborted after " + std::to_string(done) +
                              " of " + std::to_string(records.size()) + " records)");
  }

  for (std::size_t b = 0; b < n_batches; ++b) {
    for (std::size_t i = 0; i < embedded[b].size(); ++i) {
      const CatalogRecord& rec = records[b * options.batch_size + i];
      EmbeddedRecord& e = embedded[b][i];
      if (e.skipped) {
        report.skipped.push_back(SkippedRecord{rec.id, rec.line, e.skip_reason});
        continue;
      }
      CatalogEntry entry{
          EntryMeta{rec.id, rec.caption, std::string(store_files::kBlobDir) + "/" + e.blob_id,
                    rec.modality},
          std::move(e.caption), std::move(e.image)};
      result.store.add(entry);
      report.image_sources.emplace_back(rec.id, rec.image_path);
    }
  }
  report.entries = result.store.size();
  if (result.store.empty()) {
    throw Error(ErrorCode::kAllRecordsSkipped,
                "all " + std::to_string(records.size()) + " records were skipped");
  }
  return result;
}

BuildReport ingest_catalog(const fs::path& catalog, const fs::path& out_dir,
                           const Backends& backends, const IngestOptions& options) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot create '" + out_dir.string() + "'");
  const BlobStore blobs(out_dir / store_files::kBlobDir);
  const fs::path report_path = out_dir / store_files::kBuildReport;

  BuildReport failed;
  failed.catalog = catalog.string();
  failed.limit = options.limit;
  failed.backend_mode = std::string(to_string(backends.mode()));
  failed.dim = backends.dim();
  failed.batch_size = options.batch_size;
  try {
    const auto records = parse_catalog(catalog);
    failed.records_in_catalog = records.size();
    failed.records_considered =
        options.limit ? std::min(*options.limit, records.size()) : records.size();
    BuildResult built = build_store(records, backends, blobs, options);
    built.report.catalog = catalog.string();
    built.store.save_dir(out_dir);
    const std::string text = build_report_json(built.report);
    write_file_bytes(report_path, as_bytes(text));
    return built.report;
  } catch (const Error& e) {
    failed.status = "aborted";
    failed.error = std::string(to_string(e.code())) + ": " + e.what();
    const std::string text = build_report_json(failed);
    try {
      write_file_bytes(report_path, as_bytes(text));
    } catch (const Error&) {
    }
    throw;
  }
}

}  // namespace mirage
