#include "mirage/mirage.h"

#include <cstdlib>
#include <cstring>
#include <thread>

#include "mirage/config.hpp"
#include "mirage/error.hpp"
#include "mirage/evaluation.hpp"
#include "mirage/ingestion.hpp"
#include "mirage/query_algebra.hpp"
#include "mirage/result_json.hpp"
#include "mirage/service.hpp"

struct mirage_store {
  mirage::VectorStore store;
};

struct mirage_engine {
  std::shared_ptr<mirage::Engine> engine;
};

struct mirage_server {
  std::shared_ptr<mirage::Engine> engine;
  std::unique_ptr<mirage::Service> service;
  std::thread thread;
};

namespace {

using mirage::Error;
using mirage::ErrorCode;
using json = nlohmann::json;

thread_local std::string g_last_error;
thread_local std::string g_last_stage;

mirage_status status_of(ErrorCode code) {
  return static_cast<mirage_status>(static_cast<int>(code) + 1);
}

mirage_status fail(mirage_status status, std::string message, std::string stage = {}) {
  g_last_error = std::move(message);
  g_last_stage = std::move(stage);
  return status;
}

// Runs fn, translating exceptions into a status and the thread's last error.
template <typename Fn>
mirage_status guarded(Fn&& fn) noexcept {
  try {
    g_last_error.clear();
    g_last_stage.clear();
    fn();
    return MIRAGE_OK;
  } catch (const Error& e) {
    return fail(status_of(e.code()), e.what(), e.stage());
  } catch (const json::exception& e) {
    return fail(MIRAGE_ERR_PARSE, e.what());
  } catch (const std::bad_alloc&) {
    return fail(MIRAGE_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(MIRAGE_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(MIRAGE_ERR_INTERNAL, "unknown error");
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::kInvalidArgument, what);
}

json parse_object(const char* text, const char* what) {
  require(text != nullptr, what);
  json j = json::parse(text);
  require(j.is_object(), what);
  return j;
}

mirage::ServiceConfig service_config_from(const char* config_json) {
  return mirage::parse_service_config(parse_object(config_json, "config must be a JSON object"));
}

mirage::BackendConfig backend_from(const json& options) {
  return options.contains("backend") ? mirage::parse_backend_config(options["backend"])
                                     : mirage::BackendConfig{};
}

}  // namespace

extern "C" {

const char* mirage_version(void) { return "1.0.0"; }

const char* mirage_status_name(mirage_status status) {
  if (status == MIRAGE_OK) return "Ok";
  if (status == MIRAGE_ERR_INTERNAL) return "Internal";
  const int code = static_cast<int>(status) - 1;
  if (code < 0 || code > static_cast<int>(ErrorCode::kIngestAborted)) return "Unknown";
  return mirage::to_string(static_cast<ErrorCode>(code)).data();
}

const char* mirage_last_error(void) { return g_last_error.c_str(); }
const char* mirage_last_error_stage(void) { return g_last_stage.c_str(); }
void mirage_string_free(char* s) { std::free(s); }

mirage_status mirage_normalize(const double* in, size_t dim, double* out) {
  return guarded([&] {
    require(in && out && dim > 0, "normalize: null pointer or zero dimension");
    auto e = mirage::normalize(std::span<const double>(in, dim));
    std::copy(e.values().begin(), e.values().end(), out);
  });
}

mirage_status mirage_cosine(const double* u, const double* v, size_t dim, double* out) {
  return guarded([&] {
    require(u && v && out && dim > 0, "cosine: null pointer or zero dimension");
    *out = mirage::cosine(std::span<const double>(u, dim), std::span<const double>(v, dim));
  });
}

mirage_status mirage_compose_modified(const double* original, const double* subtract,
                                      const double* add, size_t dim, double* out) {
  return guarded([&] {
    require(original && subtract && add && out && dim > 0,
            "compose_modified: null pointer or zero dimension");
    auto wrap = [dim](const double* p) {
      return mirage::Embedding::from_unit(std::vector<double>(p, p + dim));
    };
    auto e = mirage::compose_modified(wrap(original), wrap(subtract), wrap(add));
    std::copy(e.values().begin(), e.values().end(), out);
  });
}

mirage_status mirage_mock_embed_text(const char* text, double* out) {
  return guarded([&] {
    require(text && out, "mock_embed_text: null pointer");
    auto e = mirage::mock_embed(std::string_view(text));
    std::copy(e.values().begin(), e.values().end(), out);
  });
}

mirage_status mirage_modified_prompt(const char* text, const char* subtract, const char* add,
                                     char** out) {
  return guarded([&] {
    require(text && out, "modified_prompt: null pointer");
    mirage::ConceptQuery q;
    q.text = text;
    if (subtract) q.subtract_term = subtract;
    if (add) q.add_term = add;
    *out = dup_string(mirage::modified_prompt_text(q));
  });
}

mirage_status mirage_store_create(size_t dim, mirage_store** out) {
  return guarded([&] {
    require(out != nullptr, "store_create: null output");
    *out = new mirage_store{mirage::VectorStore(dim)};
  });
}

mirage_status mirage_store_load(const char* dir, mirage_store** out) {
  return guarded([&] {
    require(dir && out, "store_load: null pointer");
    *out = new mirage_store{mirage::VectorStore::load_dir(dir)};
  });
}

mirage_status mirage_store_save(const mirage_store* store, const char* dir) {
  return guarded([&] {
    require(store && dir, "store_save: null pointer");
    store->store.save_dir(dir);
  });
}

void mirage_store_free(mirage_store* store) { delete store; }

size_t mirage_store_size(const mirage_store* store) { return store ? store->store.size() : 0; }
size_t mirage_store_dim(const mirage_store* store) { return store ? store->store.dim() : 0; }

mirage_status mirage_store_add(mirage_store* store, const char* id, const char* caption,
                               const char* image_ref, const char* modality,
                               const double* caption_embedding, const double* image_embedding) {
  return guarded([&] {
    require(store && id && caption && caption_embedding && image_embedding,
            "store_add: null pointer");
    const std::size_t d = store->store.dim();
    mirage::CatalogEntry entry{
        mirage::EntryMeta{id, caption, image_ref ? image_ref : "", modality ? modality : "unknown"},
        mirage::normalize(std::span<const double>(caption_embedding, d)),
        mirage::normalize(std::span<const double>(image_embedding, d))};
    store->store.add(entry);
  });
}

mirage_status mirage_store_top_k(const mirage_store* store, const double* query, size_t k,
                                 mirage_target target, size_t* out_rows,
                                 double* out_similarities, size_t* out_count) {
  return guarded([&] {
    require(store && query && out_rows && out_similarities && out_count, "top_k: null pointer");
    const auto t = target == MIRAGE_TARGET_IMAGES ? mirage::Target::kImages
                                                  : mirage::Target::kCaptions;
    const auto hits =
        store->store.top_k(std::span<const double>(query, store->store.dim()), k, t);
    for (std::size_t i = 0; i < hits.size(); ++i) {
      out_rows[i] = *store->store.row_of(hits[i].entry_id);
      out_similarities[i] = hits[i].similarity;
    }
    *out_count = hits.size();
  });
}

const char* mirage_store_entry_id(const mirage_store* store, size_t row) {
  if (!store || row >= store->store.size()) return nullptr;
  return store->store.meta(row).id.c_str();
}

mirage_status mirage_config_load(const char* path, char** out_json) {
  return guarded([&] {
    require(path && out_json, "config_load: null pointer");
    const auto config = mirage::load_service_config(path);
    json j;
    j["store"] = config.store_dir.string();
    if (config.blob_dir) j["blob_dir"] = config.blob_dir->string();
    j["host"] = config.host;
    j["port"] = config.port;
    j["default_k"] = config.default_k;
    j["cors_origins"] = config.cors_origins;
    j["synthesize"] = config.pipeline.synthesize;
    j["enrich_dual"] = config.pipeline.enrich_dual;
    const auto& b = config.backend;
    j["backend"] = {{"mode", std::string(mirage::to_string(b.mode))},
                    {"encoder_url", b.encoder_url},
                    {"enricher_url", b.enricher_url},
                    {"synthesizer_url", b.synthesizer_url},
                    {"timeout", b.timeout_seconds},
                    {"retries", b.retries},
                    {"dim", b.dim},
                    {"enrich_template", b.enrich_template}};
    *out_json = dup_string(j.dump());
  });
}

mirage_status mirage_engine_open(const char* config_json, mirage_engine** out) {
  return guarded([&] {
    require(out != nullptr, "engine_open: null output");
    auto config = service_config_from(config_json);
    if (config.default_k == 0) throw Error(ErrorCode::kInvalidK, "default_k must be positive");
    *out = new mirage_engine{mirage::Engine::open(config)};
  });
}

void mirage_engine_close(mirage_engine* engine) { delete engine; }

size_t mirage_engine_size(const mirage_engine* engine) {
  return engine ? engine->engine->store().size() : 0;
}

mirage_status mirage_engine_query(const mirage_engine* engine, const char* text, size_t k,
                                  int flags, char** out) {
  return guarded([&] {
    require(engine && text && out, "engine_query: null pointer");
    const auto& e = *engine->engine;
    mirage::ConceptQuery q{text, std::nullopt, std::nullopt, k ? k : e.default_k()};
    const auto result = e.pipeline().single_query(q);
    if (flags & MIRAGE_FORMAT_JSON) {
      *out = dup_string(
          mirage::result_to_json(result, e.store(), !(flags & MIRAGE_OMIT_TIMINGS)).dump(2) + "\n");
    } else {
      *out = dup_string(mirage::result_to_text(result, e.store()));
    }
  });
}

mirage_status mirage_engine_dual(const mirage_engine* engine, const char* text,
                                 const char* subtract, const char* add, size_t k, int flags,
                                 char** out) {
  return guarded([&] {
    require(engine && text && out, "engine_dual: null pointer");
    const auto& e = *engine->engine;
    mirage::ConceptQuery q;
    q.text = text;
    if (subtract) q.subtract_term = subtract;
    if (add) q.add_term = add;
    q.k = k ? k : e.default_k();
    const auto result = e.pipeline().dual_query(q);
    if (flags & MIRAGE_FORMAT_JSON) {
      *out = dup_string(
          mirage::dual_to_json(result, e.store(), !(flags & MIRAGE_OMIT_TIMINGS)).dump(2) + "\n");
    } else {
      *out = dup_string(mirage::dual_to_text(result));
    }
  });
}

mirage_status mirage_ingest(const char* options_json, char** out_report) {
  std::filesystem::path report_path;
  const mirage_status status = guarded([&] {
    const json options = parse_object(options_json, "ingest options must be a JSON object");
    mirage::IngestOptions opts;
    const auto catalog = options.at("catalog").get<std::string>();
    const auto out_dir = options.at("out").get<std::string>();
    report_path = std::filesystem::path(out_dir) / mirage::store_files::kBuildReport;
    if (options.contains("limit") && !options["limit"].is_null()) {
      opts.limit = options["limit"].get<std::size_t>();
    }
    opts.batch_size = options.value("batch_size", opts.batch_size);
    opts.parallelism = options.value("parallelism", opts.parallelism);
    const std::string policy = options.value("on_missing_image", std::string("skip"));
    require(policy == "skip" || policy == "fail", "on_missing_image must be 'skip' or 'fail'");
    opts.on_missing_image =
        policy == "fail" ? mirage::MissingImagePolicy::kFail : mirage::MissingImagePolicy::kSkip;
    const auto backends = mirage::make_backends(backend_from(options));
    const auto report = mirage::ingest_catalog(catalog, out_dir, *backends, opts);
    if (out_report) *out_report = dup_string(mirage::build_report_json(report));
  });
  if (status != MIRAGE_OK && out_report && !report_path.empty() &&
      std::filesystem::exists(report_path)) {
    try {
      const auto bytes = mirage::read_file_bytes(report_path);
      *out_report = dup_string(std::string(bytes.begin(), bytes.end()));
    } catch (...) {
    }
  }
  return status;
}

mirage_status mirage_evaluate(const char* options_json, char** out_report_json, char** out_table) {
  return guarded([&] {
    const json options = parse_object(options_json, "evaluate options must be a JSON object");
    std::vector<std::filesystem::path> files;
    for (const auto& p : options.at("pairs")) files.emplace_back(p.get<std::string>());
    require(!files.empty(), "no pair files given");
    const std::string strategy_name = options.value("strategy", std::string("max_accuracy"));
    const auto strategy = mirage::parse_strategy(strategy_name);
    require(strategy.has_value(), "strategy must be max_accuracy or mean_midpoint");
    const std::string std_name = options.value("std", std::string("population"));
    require(std_name == "population" || std_name == "sample", "std must be population or sample");
    const auto std_mode =
        std_name == "sample" ? mirage::StdMode::kSample : mirage::StdMode::kPopulation;
    const auto backends = mirage::make_backends(backend_from(options));
    const auto reports = mirage::run_protocol(files, *backends, *strategy, std_mode);
    if (out_report_json) *out_report_json = dup_string(mirage::reports_to_json(reports).dump(2) + "\n");
    if (out_table) *out_table = dup_string(mirage::format_report_table(reports));
  });
}

mirage_status mirage_server_start(const char* config_json, mirage_server** out) {
  return guarded([&] {
    require(out != nullptr, "server_start: null output");
    auto config = service_config_from(config_json);
    if (config.port < 0 || config.port > 65535) {
      throw Error(ErrorCode::kInvalidArgument, "port must be in [1, 65535] (or 0 for any)");
    }
    auto server = std::make_unique<mirage_server>();
    server->engine = mirage::Engine::open(config);
    server->service = std::make_unique<mirage::Service>(server->engine, config);
    server->service->bind();
    server->thread = std::thread([svc = server->service.get()] { svc->listen(); });
    server->service->wait_until_ready();
    *out = server.release();
  });
}

int mirage_server_port(const mirage_server* server) {
  return server ? server->service->port() : -1;
}

void mirage_server_stop(mirage_server* server) {
  if (!server) return;
  server->service->stop();
  if (server->thread.joinable()) server->thread.join();
  delete server;
}

}  // extern "C"
