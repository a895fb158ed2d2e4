#include "mirage/result_json.hpp"

#include <cmath>
#include <cstdio>

namespace mirage {

double round6(double x) noexcept {
  const double r = std::round(x * 1e6) / 1e6;
  return r == 0.0 ? 0.0 : r;  // no "-0.0" on the wire
}

std::string image_url(const std::string& id) { return "/api/images/" + id; }

namespace {

ojson optional_string(const std::optional<std::string>& s) {
  return s ? ojson(*s) : ojson(nullptr);
}

ojson optional_image_url(const std::optional<std::string>& blob) {
  return blob ? ojson(image_url(*blob)) : ojson(nullptr);
}

ojson timings_to_json(const StageTimings& timings) {
  ojson j = ojson::object();
  for (const auto& [stage, ms] : timings) j[stage] = std::round(ms * 1000.0) / 1000.0;
  return j;
}

ojson branch_to_json(const DualBranch& b) {
  ojson j;
  j["hit"] = {{"rank", b.hit.rank},
              {"entry_id", b.hit.entry_id},
              {"similarity", round6(b.hit.similarity)},
              {"caption", b.entry.caption},
              {"image_url", image_url(b.hit.entry_id)}};
  j["entry"] = entry_to_json(b.entry);
  j["synthetic_image_ref"] = optional_string(b.synthetic_image_ref);
  j["synthetic_image_url"] = optional_image_url(b.synthetic_image_ref);
  j["prompt_used"] = b.prompt_used;
  return j;
}

}  // namespace

ojson entry_to_json(const EntryMeta& m) {
  ojson j;
  j["id"] = m.id;
  j["caption"] = m.caption;
  j["image_ref"] = m.image_ref;
  j["modality"] = m.modality;
  j["image_url"] = image_url(m.id);
  return j;
}

ojson hit_to_json(const SearchHit& hit, const VectorStore& store) {
  ojson j;
  j["rank"] = hit.rank;
  j["entry_id"] = hit.entry_id;
  j["similarity"] = round6(hit.similarity);
  j["caption"] = store.get(hit.entry_id).caption;
  j["image_url"] = image_url(hit.entry_id);
  return j;
}

ojson result_to_json(const RetrievalResult& r, const VectorStore& store, bool with_timings) {
  ojson j;
  j["query_text"] = r.query_text;
  j["k"] = r.k;
  j["stage1_hits"] = ojson::array();
  for (const auto& h : r.stage1_hits) j["stage1_hits"].push_back(hit_to_json(h, store));
  j["context_captions"] = r.context_captions;
  j["enriched_caption"] = r.enriched_caption;
  j["final_hit"] = hit_to_json(r.final_hit, store);
  j["final_entry"] = entry_to_json(r.final_entry);
  j["synthetic_prompt"] = r.synthetic_prompt;
  j["synthetic_image_ref"] = optional_string(r.synthetic_image_ref);
  j["synthetic_image_url"] = optional_image_url(r.synthetic_image_ref);
  j["warnings"] = r.warnings;
  if (with_timings) j["timings_ms"] = timings_to_json(r.timings);
  return j;
}

ojson dual_to_json(const DualSearchResult& r, const VectorStore&, bool with_timings) {
  ojson j;
  j["query_text"] = r.query_text;
  j["subtract"] = r.subtract_term;
  j["add"] = r.add_term;
  j["k"] = r.k;
  j["original"] = branch_to_json(r.original);
  j["modified"] = branch_to_json(r.modified);
  j["modified_similarity_to_original"] = round6(r.modified_similarity_to_original);
  j["revised_description"] = optional_string(r.revised_description);
  j["warnings"] = r.warnings;
  if (with_timings) j["timings_ms"] = timings_to_json(r.timings);
  return j;
}

ojson report_to_json(const EvaluationReport& r) {
  ojson j;
  j["pair_type"] = std::string(to_string(r.pair_type));
  j["n_similar"] = r.n_similar;
  j["n_dissimilar"] = r.n_dissimilar;
  j["mean_similar"] = r.mean_similar;
  j["std_similar"] = r.std_similar;
  j["mean_dissimilar"] = r.mean_dissimilar;
  j["std_dissimilar"] = r.std_dissimilar;
  j["threshold"] = r.threshold;
  j["accuracy"] = r.accuracy;
  j["threshold_strategy"] = std::string(to_string(r.threshold_strategy));
  j["row"] = format_report_row(r);
  return j;
}

ojson reports_to_json(const std::vector<EvaluationReport>& reports) {
  ojson j;
  j["reports"] = ojson::array();
  for (const auto& r : reports) j["reports"].push_back(report_to_json(r));
  return j;
}

std::string result_to_text(const RetrievalResult& r, const VectorStore& store) {
  std::string out = "query: " + r.query_text + "\n\nstage 1 (top " + std::to_string(r.k) + "):\n";
  char line[64];
  for (const auto& h : r.stage1_hits) {
    std::snprintf(line, sizeof line, "  %2zu. %.6f  ", h.rank, h.similarity);
    out += line + h.entry_id + "  " + store.get(h.entry_id).caption + "\n";
  }
  out += "\nenriched description:\n  " + r.enriched_caption + "\n\nresult:\n";
  std::snprintf(line, sizeof line, "  %.6f  ", r.final_hit.similarity);
  out += line + r.final_entry.id + "  [" + r.final_entry.modality + "] " + r.final_entry.caption +
         "\n  image: " + r.final_entry.image_ref + "\n";
  out += "\nsynthetic image (prompt: \"" + r.synthetic_prompt + "\"): " +
         (r.synthetic_image_ref ? *r.synthetic_image_ref : std::string("none")) + "\n";
  for (const auto& w : r.warnings) out += "warning: " + w + "\n";
  return out;
}

std::string dual_to_text(const DualSearchResult& r) {
  std::string out = "query: " + r.query_text + "\nsubtract: " + r.subtract_term +
                    "\nadd: " + r.add_term + "\n";
  char line[96];
  auto branch = [&](const char* name, const DualBranch& b) {
    std::snprintf(line, sizeof line, "\n%s\n  %.6f  ", name, b.hit.similarity);
    out += line + b.entry.id + "  [" + b.entry.modality + "] " + b.entry.caption + "\n";
    out += "  prompt: " + b.prompt_used + "\n  synthetic image: " +
           (b.synthetic_image_ref ? *b.synthetic_image_ref : std::string("none")) + "\n";
  };
  branch("original", r.original);
  branch("modified", r.modified);
  std::snprintf(line, sizeof line, "\ncosine(original, modified) = %.6f\n",
                r.modified_similarity_to_original);
  out += line;
  if (r.revised_description) out += "revised description:\n  " + *r.revised_description + "\n";
  for (const auto& w : r.warnings) out += "warning: " + w + "\n";
  return out;
}

}  // namespace mirage
