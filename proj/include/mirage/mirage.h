/*
 * libmirage: multimodal retrieval engine, C interface.
 *
 * All objects are opaque handles owned by the caller and released with the
 * matching *_free / *_close / *_stop call. Functions return a mirage_status;
 * on failure the message (and pipeline stage, when one applies) is available
 * from mirage_last_error() / mirage_last_error_stage() on the same thread.
 * Strings returned through char** out-parameters are heap-allocated and must
 * be released with mirage_string_free().
 *
 * Structured inputs and outputs (configs, results, reports) are JSON text.
 */
#ifndef MIRAGE_MIRAGE_H
#define MIRAGE_MIRAGE_H

#include <stddef.h>

#if defined(_WIN32)
#  if defined(MIRAGE_BUILDING_LIBRARY)
#    define MIRAGE_API __declspec(dllexport)
#  else
#    define MIRAGE_API __declspec(dllimport)
#  endif
#else
#  define MIRAGE_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mirage_status {
  MIRAGE_OK = 0,
  MIRAGE_ERR_INVALID_ARGUMENT = 1,
  MIRAGE_ERR_DIMENSION_MISMATCH = 2,
  MIRAGE_ERR_ZERO_VECTOR = 3,
  MIRAGE_ERR_NON_FINITE_INPUT = 4,
  MIRAGE_ERR_DUPLICATE_ID = 5,
  MIRAGE_ERR_NOT_FOUND = 6,
  MIRAGE_ERR_EMPTY_STORE = 7,
  MIRAGE_ERR_INVALID_K = 8,
  MIRAGE_ERR_IO = 9,
  MIRAGE_ERR_BAD_MAGIC = 10,
  MIRAGE_ERR_VERSION_UNSUPPORTED = 11,
  MIRAGE_ERR_CORRUPT_LENGTH = 12,
  MIRAGE_ERR_META_VEC_MISMATCH = 13,
  MIRAGE_ERR_DEGENERATE_QUERY = 14,
  MIRAGE_ERR_MISSING_TERMS = 15,
  MIRAGE_ERR_EMPTY_TEXT = 16,
  MIRAGE_ERR_EMPTY_BLOB = 17,
  MIRAGE_ERR_BACKEND_UNREACHABLE = 18,
  MIRAGE_ERR_BACKEND_ERROR = 19,
  MIRAGE_ERR_EMPTY_RESPONSE = 20,
  MIRAGE_ERR_PARSE = 21,
  MIRAGE_ERR_MISSING_FIELD = 22,
  MIRAGE_ERR_DEGENERATE_LABELS = 23,
  MIRAGE_ERR_ALL_RECORDS_SKIPPED = 24,
  MIRAGE_ERR_INGEST_ABORTED = 25,
  MIRAGE_ERR_INTERNAL = 99
} mirage_status;

typedef enum mirage_target {
  MIRAGE_TARGET_CAPTIONS = 0,
  MIRAGE_TARGET_IMAGES = 1
} mirage_target;

/* Output flags for query results. */
enum {
  MIRAGE_FORMAT_TEXT = 0,
  MIRAGE_FORMAT_JSON = 1,
  MIRAGE_OMIT_TIMINGS = 2
};

#define MIRAGE_MOCK_DIM 64

typedef struct mirage_store mirage_store;
typedef struct mirage_engine mirage_engine;
typedef struct mirage_server mirage_server;

MIRAGE_API const char* mirage_version(void);
MIRAGE_API const char* mirage_status_name(mirage_status status);
MIRAGE_API const char* mirage_last_error(void);
MIRAGE_API const char* mirage_last_error_stage(void);
MIRAGE_API void mirage_string_free(char* s);

/* --- vector math ------------------------------------------------------- */

MIRAGE_API mirage_status mirage_normalize(const double* in, size_t dim, double* out);
MIRAGE_API mirage_status mirage_cosine(const double* u, const double* v, size_t dim, double* out);
/* out = normalize(original - subtract + add); inputs must be unit-norm. */
MIRAGE_API mirage_status mirage_compose_modified(const double* original, const double* subtract,
                                                 const double* add, size_t dim, double* out);
/* Deterministic token-hash embedding; out holds MIRAGE_MOCK_DIM values. */
MIRAGE_API mirage_status mirage_mock_embed_text(const char* text, double* out);
/* Text prompt for the modified branch of a dual search. */
MIRAGE_API mirage_status mirage_modified_prompt(const char* text, const char* subtract,
                                                const char* add, char** out);

/* --- vector store ------------------------------------------------------ */

MIRAGE_API mirage_status mirage_store_create(size_t dim, mirage_store** out);
MIRAGE_API mirage_status mirage_store_load(const char* dir, mirage_store** out);
MIRAGE_API mirage_status mirage_store_save(const mirage_store* store, const char* dir);
MIRAGE_API void mirage_store_free(mirage_store* store);
MIRAGE_API size_t mirage_store_size(const mirage_store* store);
MIRAGE_API size_t mirage_store_dim(const mirage_store* store);
/* Embeddings are normalized on insert. */
MIRAGE_API mirage_status mirage_store_add(mirage_store* store, const char* id, const char* caption,
                                          const char* image_ref, const char* modality,
                                          const double* caption_embedding,
                                          const double* image_embedding);
/* Writes up to k hits (row index + similarity), best first; *out_count gets
 * min(k, size). The query need not be normalized. */
MIRAGE_API mirage_status mirage_store_top_k(const mirage_store* store, const double* query,
                                            size_t k, mirage_target target, size_t* out_rows,
                                            double* out_similarities, size_t* out_count);
/* Borrowed pointer, valid while the store lives; NULL when out of range. */
MIRAGE_API const char* mirage_store_entry_id(const mirage_store* store, size_t row);

/* --- configuration ----------------------------------------------------- */

/* Reads a JSON config file, resolving relative paths against its directory. */
MIRAGE_API mirage_status mirage_config_load(const char* path, char** out_json);

/* --- engine: loaded store + backends + query pipeline ------------------ */

MIRAGE_API mirage_status mirage_engine_open(const char* config_json, mirage_engine** out);
MIRAGE_API void mirage_engine_close(mirage_engine* engine);
MIRAGE_API size_t mirage_engine_size(const mirage_engine* engine);
/* k == 0 uses the configured default. flags: MIRAGE_FORMAT_* | MIRAGE_OMIT_TIMINGS. */
MIRAGE_API mirage_status mirage_engine_query(const mirage_engine* engine, const char* text, size_t k,
                                             int flags, char** out);
MIRAGE_API mirage_status mirage_engine_dual(const mirage_engine* engine, const char* text,
                                            const char* subtract, const char* add, size_t k,
                                            int flags, char** out);

/* --- batch operations -------------------------------------------------- */

/* options: {"catalog", "out", "limit"?, "batch_size"?, "parallelism"?,
 *           "on_missing_image": "skip"|"fail", "backend": {...}}
 * out_report receives the build report JSON (also on failure, when written). */
MIRAGE_API mirage_status mirage_ingest(const char* options_json, char** out_report);

/* options: {"pairs": [paths], "strategy": "max_accuracy"|"mean_midpoint",
 *           "std": "population"|"sample", "backend": {...}} */
MIRAGE_API mirage_status mirage_evaluate(const char* options_json, char** out_report_json,
                                         char** out_table);

/* --- HTTP service ------------------------------------------------------ */

/* Loads the engine, binds and serves on a background thread. A config port
 * of 0 picks a free port. */
MIRAGE_API mirage_status mirage_server_start(const char* config_json, mirage_server** out);
MIRAGE_API int mirage_server_port(const mirage_server* server);
/* Drains in-flight requests, stops and frees the server. */
MIRAGE_API void mirage_server_stop(mirage_server* server);

#ifdef __cplusplus
}
#endif

#endif /* MIRAGE_MIRAGE_H */
