#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mirage/backends.hpp"
#include "mirage/blob_store.hpp"
#include "mirage/query_algebra.hpp"
#include "mirage/vector_store.hpp"

namespace mirage {

// (stage name, milliseconds), in execution order.
using StageTimings = std::vector<std::pair<std::string, double>>;

struct RetrievalResult {
  std::string query_text;
  std::size_t k = 0;
  std::vector<SearchHit> stage1_hits;
  std::vector<std::string> context_captions;
  std::string enriched_caption;
  SearchHit final_hit;
  EntryMeta final_entry;
  std::optional<std::string> synthetic_image_ref;
  std::string synthetic_prompt;
  std::vector<std::string> warnings;
  StageTimings timings;
};

struct DualBranch {
  SearchHit hit;
  EntryMeta entry;
  std::optional<std::string> synthetic_image_ref;
  std::string prompt_used;
};

struct DualSearchResult {
  std::string query_text;
  std::string subtract_term;
  std::string add_term;
  std::size_t k = 0;
  DualBranch original;
  DualBranch modified;
  double modified_similarity_to_original = 0.0;
  std::optional<std::string> revised_description;
  std::vector<std::string> warnings;
  StageTimings timings;
};

struct PipelineOptions {
  bool synthesize = true;
  // Produce the revised description for the modified branch of a dual query.
  bool enrich_dual = true;
};

// Query flows over a read-only store. One instance may serve concurrent
// requests; the store and backends must outlive it.
class Pipeline {
 public:
  Pipeline(const VectorStore& store, const Backends& backends, const BlobStore& blobs,
           PipelineOptions options = {});

  // Two-stage retrieval: encode the query, take the top-k image matches and
  // their captions as context, enrich, re-encode the enriched caption and
  // retrieve the final image. The synthetic image uses the raw query text.
  RetrievalResult single_query(const ConceptQuery& query) const;

  // Retrieves top-1 for the original query embedding and for
  // normalize(e_query - e_subtract + e_add), each with its own synthetic image.
  DualSearchResult dual_query(const ConceptQuery& query) const;

 private:
  std::optional<std::string> synthesize_to_blob(const std::string& prompt,
                                                std::vector<std::string>& warnings) const;

  const VectorStore& store_;
  const Backends& backends_;
  const BlobStore& blobs_;
  PipelineOptions options_;
};

}  // namespace mirage
