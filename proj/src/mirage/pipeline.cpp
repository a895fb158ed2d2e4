#include "mirage/pipeline.hpp"

#include <chrono>
#include <future>

#include "mirage/error.hpp"

namespace mirage {

namespace {

class StageRunner {
 public:
  explicit StageRunner(StageTimings& timings) : timings_(timings) {}

  template <typename Fn>
  auto operator()(std::string_view stage, Fn&& fn) {
    const auto start = std::chrono::steady_clock::now();
    try {
      if constexpr (std::is_void_v<std::invoke_result_t<Fn>>) {
        fn();
        record(stage, start);
      } else {
        auto value = fn();
        record(stage, start);
        return value;
      }
    } catch (const Error& e) {
      throw e.with_stage(stage);
    }
  }

 private:
  void record(std::string_view stage, std::chrono::steady_clock::time_point start) {
    const std::chrono::duration<double, std::milli> ms = std::chrono::steady_clock::now() - start;
    timings_.emplace_back(std::string(stage), ms.count());
  }

  StageTimings& timings_;
};

std::vector<std::string> captions_of(const VectorStore& store, const std::vector<SearchHit>& hits) {
  std::vector<std::string> out;
  out.reserve(hits.size());
  for (const auto& h : hits) out.push_back(store.get(h.entry_id).caption);
  return out;
}

}  // namespace

Pipeline::Pipeline(const VectorStore& store, const Backends& backends, const BlobStore& blobs,
                   PipelineOptions options)
    : store_(store), backends_(backends), blobs_(blobs), options_(options) {}

std::optional<std::string> Pipeline::synthesize_to_blob(const std::string& prompt,
                                                        std::vector<std::string>& warnings) const {
  if (!options_.synthesize) return std::nullopt;
  try {
    GeneratedImage image = backends_.synthesize_image(prompt);
    return blobs_.put(image.bytes, image.media_type);
  } catch (const Error& e) {
    warnings.push_back(std::string(stage::kSynthesize) + ": " + std::string(to_string(e.code())) +
                       ": " + e.what());
    return std::nullopt;
  }
}

RetrievalResult Pipeline::single_query(const ConceptQuery& query) const {
  query.validate();
  if (store_.empty()) throw Error(ErrorCode::kEmptyStore, "store is empty", std::string(stage::kStage1));

  RetrievalResult result;
  result.query_text = query.text;
  result.k = query.k;
  StageRunner run(result.timings);

  const Embedding e_query =
      run(stage::kEncodeQuery, [&] { return backends_.encode_text(query.text); });
  result.stage1_hits =
      run(stage::kStage1, [&] { return store_.top_k(e_query, query.k, Target::kImages); });
  result.context_captions = captions_of(store_, result.stage1_hits);
  result.enriched_caption = run(stage::kEnrich, [&] {
    return backends_.enrich_caption(EnrichmentRequest{query.text, result.context_captions});
  });
  const Embedding e_enriched =
      run(stage::kEncodeEnriched, [&] { return backends_.encode_text(result.enriched_caption); });
  result.final_hit =
      run(stage::kStage2, [&] { return store_.top_k(e_enriched, 1, Target::kImages).front(); });
  result.final_entry = store_.get(result.final_hit.entry_id);

  // The synthesizer always sees the user's own prompt, never the enriched text.
  result.synthetic_prompt = query.text;
  run(stage::kSynthesize, [&] {
    result.synthetic_image_ref = synthesize_to_blob(query.text, result.warnings);
  });
  return result;
}

DualSearchResult Pipeline::dual_query(const ConceptQuery& query) const {
  query.validate();
  if (!query.is_dual()) {
    throw Error(ErrorCode::kMissingTerms, "dual search needs both a subtract and an add term");
  }
  if (store_.empty()) throw Error(ErrorCode::kEmptyStore, "store is empty", std::string(stage::kStage1));

  DualSearchResult result;
  result.query_text = query.text;
  result.subtract_term = *query.subtract_term;
  result.add_term = *query.add_term;
  result.k = query.k;
  result.original.prompt_used = query.text;
  result.modified.prompt_used = modified_prompt_text(query);

  // Image generation shares nothing with retrieval, so both run alongside it.
  std::vector<std::string> original_warnings;
  std::vector<std::string> modified_warnings;
  const auto synth_start = std::chrono::steady_clock::now();
  auto original_image = std::async(std::launch::async, [&] {
    return synthesize_to_blob(result.original.prompt_used, original_warnings);
  });
  auto modified_image = std::async(std::launch::async, [&] {
    return synthesize_to_blob(result.modified.prompt_used, modified_warnings);
  });

  StageRunner run(result.timings);
  auto join_images = [&] {
    result.original.synthetic_image_ref = original_image.get();
    result.modified.synthetic_image_ref = modified_image.get();
    const std::chrono::duration<double, std::milli> ms =
        std::chrono::steady_clock::now() - synth_start;
    result.timings.emplace_back(std::string(stage::kSynthesize), ms.count());
    result.warnings.insert(result.warnings.end(), original_warnings.begin(),
                           original_warnings.end());
    result.warnings.insert(result.warnings.end(), modified_warnings.begin(),
                           modified_warnings.end());
  };

  try {
    const auto embeddings = run(stage::kEncodeQuery, [&] {
      return backends_.encode_text({query.text, *query.subtract_term, *query.add_term});
    });
    const Embedding& e_original = embeddings[0];
    const Embedding& e_subtract = embeddings[1];
    const Embedding& e_add = embeddings[2];

    std::vector<SearchHit> modified_context;
    run(stage::kStage1, [&] {
      const Embedding e_modified = compose_modified(e_original, e_subtract, e_add);
      result.modified_similarity_to_original = cosine(e_original, e_modified);
      result.original.hit = store_.top_k(e_original, 1, Target::kImages).front();
      modified_context = store_.top_k(e_modified, query.k, Target::kImages);
      result.modified.hit = modified_context.front();
    });
    result.original.entry = store_.get(result.original.hit.entry_id);
    result.modified.entry = store_.get(result.modified.hit.entry_id);

    if (options_.enrich_dual) {
      result.revised_description = run(stage::kEnrich, [&] {
        return backends_.enrich_caption(
            EnrichmentRequest{result.modified.prompt_used, captions_of(store_, modified_context)});
      });
    }
  } catch (...) {
    // Futures from std::async block in their destructors; collect them first.
    original_image.wait();
    modified_image.wait();
    throw;
  }
  join_images();
  return result;
}

}  // namespace mirage
