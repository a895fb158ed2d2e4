#include "mirage/config.hpp"

#include <fstream>

#include "mirage/error.hpp"

namespace mirage {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

template <typename T>
T get_as(const json& j, const char* key, const T& fallback) {
  if (!j.contains(key) || j[key].is_null()) return fallback;
  try {
    return j[key].get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::kInvalidArgument, std::string("config field '") + key + "' has the wrong type");
  }
}

}  // namespace

BackendConfig parse_backend_config(const json& j, BackendConfig base) {
  if (!j.is_object()) throw Error(ErrorCode::kInvalidArgument, "backend config must be an object");
  const std::string mode = get_as<std::string>(j, "mode", std::string(to_string(base.mode)));
  if (mode == "mock") {
    base.mode = BackendMode::kMock;
  } else if (mode == "remote") {
    base.mode = BackendMode::kRemote;
  } else {
    throw Error(ErrorCode::kInvalidArgument, "backend mode must be 'mock' or 'remote'");
  }
  base.encoder_url = get_as(j, "encoder_url", base.encoder_url);
  base.enricher_url = get_as(j, "enricher_url", base.enricher_url);
  base.synthesizer_url = get_as(j, "synthesizer_url", base.synthesizer_url);
  base.timeout_seconds = get_as(j, "timeout", base.timeout_seconds);
  base.retries = get_as(j, "retries", base.retries);
  base.dim = get_as(j, "dim", base.dim);
  base.enrich_template = get_as(j, "enrich_template", base.enrich_template);
  return base;
}

ServiceConfig parse_service_config(const json& j, ServiceConfig base) {
  if (!j.is_object()) throw Error(ErrorCode::kInvalidArgument, "config must be a JSON object");
  if (j.contains("store")) base.store_dir = get_as<std::string>(j, "store", "");
  if (j.contains("blob_dir") && !j["blob_dir"].is_null()) {
    base.blob_dir = fs::path(get_as<std::string>(j, "blob_dir", ""));
  }
  if (j.contains("backend")) base.backend = parse_backend_config(j["backend"], base.backend);
  base.host = get_as(j, "host", base.host);
  base.port = get_as(j, "port", base.port);
  base.default_k = get_as(j, "default_k", base.default_k);
  base.cors_origins = get_as(j, "cors_origins", base.cors_origins);
  base.pipeline.synthesize = get_as(j, "synthesize", base.pipeline.synthesize);
  base.pipeline.enrich_dual = get_as(j, "enrich_dual", base.pipeline.enrich_dual);
  return base;
}

ServiceConfig load_service_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open config '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, path.string() + ": " + e.what());
  }
  auto config = parse_service_config(j);
  // Relative paths in a config file are relative to the file.
  const fs::path base = path.parent_path();
  if (!config.store_dir.empty() && config.store_dir.is_relative()) {
    config.store_dir = base / config.store_dir;
  }
  if (config.blob_dir && config.blob_dir->is_relative()) config.blob_dir = base / *config.blob_dir;
  return config;
}

void ServiceConfig::validate() const {
  if (port < 1 || port > 65535) {
    throw Error(ErrorCode::kInvalidArgument, "port must be in [1, 65535]");
  }
  if (default_k == 0) throw Error(ErrorCode::kInvalidArgument, "default_k must be positive");
  backend.validate();
}

std::unique_ptr<Engine> Engine::open(const ServiceConfig& config) {
  if (config.store_dir.empty()) throw Error(ErrorCode::kInvalidArgument, "no store directory configured");
  if (!fs::is_directory(config.store_dir)) {
    throw Error(ErrorCode::kIoError, "store directory '" + config.store_dir.string() + "' does not exist");
  }
  auto store = VectorStore::load_dir(config.store_dir);
  auto backends = make_backends(config.backend);
  if (backends->dim() != store.dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "store dimension " + std::to_string(store.dim()) + " does not match backend dimension " +
                    std::to_string(backends->dim()));
  }
  auto engine = std::make_unique<Engine>(std::move(store), std::move(backends),
                                         BlobStore(config.blob_path()), config.pipeline,
                                         config.default_k);
  engine->store_dir_ = config.store_dir;
  return engine;
}

Engine::Engine(VectorStore store, std::unique_ptr<Backends> backends, BlobStore blobs,
               PipelineOptions options, std::size_t default_k)
    : store_(std::move(store)),
      backends_(std::move(backends)),
      blobs_(std::move(blobs)),
      pipeline_(store_, *backends_, blobs_, options),
      default_k_(default_k) {}

Blob Engine::image_for(const std::string& id) const {
  if (blobs_.contains(id)) return blobs_.get(id);
  const auto row = store_.row_of(id);
  if (!row) throw Error(ErrorCode::kNotFound, "no image or entry with id '" + id + "'");
  const std::string& ref = store_.meta(*row).image_ref;
  const std::string prefix = std::string(store_files::kBlobDir) + "/";
  if (ref.rfind(prefix, 0) == 0 && blobs_.contains(ref.substr(prefix.size()))) {
    return blobs_.get(ref.substr(prefix.size()));
  }
  fs::path path(ref);
  if (path.is_relative()) path = store_dir_ / path;
  if (!fs::is_regular_file(path)) {
    throw Error(ErrorCode::kNotFound, "image for entry '" + id + "' is not available");
  }
  Blob blob;
  blob.bytes = read_file_bytes(path);
  blob.media_type = sniff_media_type(blob.bytes);
  return blob;
}

}  // namespace mirage
