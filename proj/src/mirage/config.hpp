#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mirage/backends.hpp"
#include "mirage/blob_store.hpp"
#include "mirage/pipeline.hpp"
#include "mirage/vector_store.hpp"

namespace mirage {

// JSON configuration:
//   {"store": DIR, "blob_dir": DIR?, "host": "127.0.0.1", "port": 8080,
//    "default_k": 5, "cors_origins": [...], "synthesize": true, "enrich_dual": true,
//    "backend": {"mode": "mock"|"remote", "encoder_url", "enricher_url",
//                "synthesizer_url", "timeout": 120, "retries": 1, "dim": 768,
//                "enrich_template": "..."}}
struct ServiceConfig {
  std::filesystem::path store_dir;
  std::optional<std::filesystem::path> blob_dir;
  BackendConfig backend;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::size_t default_k = kDefaultK;
  std::vector<std::string> cors_origins;
  PipelineOptions pipeline;

  std::filesystem::path blob_path() const {
    return blob_dir ? *blob_dir : store_dir / store_files::kBlobDir;
  }
  // Throws InvalidArgument (port range, k, backend URLs).
  void validate() const;
};

inline constexpr const char* kConfigEnvVar = "MIRAGE_CONFIG";

// Throws InvalidArgument on unknown values or wrong types.
BackendConfig parse_backend_config(const nlohmann::json& j, BackendConfig base = {});
ServiceConfig parse_service_config(const nlohmann::json& j, ServiceConfig base = {});
// Throws IoError, ParseError, InvalidArgument.
ServiceConfig load_service_config(const std::filesystem::path& path);

// A loaded store with its backends, blob directory and query pipeline.
class Engine {
 public:
  // Loads the store from config.store_dir. Throws store/IO errors.
  static std::unique_ptr<Engine> open(const ServiceConfig& config);

  Engine(VectorStore store, std::unique_ptr<Backends> backends, BlobStore blobs,
         PipelineOptions options, std::size_t default_k);
  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  const VectorStore& store() const noexcept { return store_; }
  const Backends& backends() const noexcept { return *backends_; }
  const BlobStore& blobs() const noexcept { return blobs_; }
  const Pipeline& pipeline() const noexcept { return pipeline_; }
  std::size_t default_k() const noexcept { return default_k_; }
  const std::filesystem::path& store_dir() const noexcept { return store_dir_; }

  // Image bytes for a blob id, or for a catalog entry's image. Throws NotFound.
  Blob image_for(const std::string& blob_or_entry_id) const;

 private:
  VectorStore store_;
  std::unique_ptr<Backends> backends_;
  BlobStore blobs_;
  Pipeline pipeline_;
  std::size_t default_k_;
  std::filesystem::path store_dir_;
};

}  // namespace mirage
