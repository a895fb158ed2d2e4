#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "mirage/evaluation.hpp"
#include "mirage/ingestion.hpp"
#include "mirage/pipeline.hpp"

namespace mirage {

using ojson = nlohmann::ordered_json;

// Similarities on the wire carry 6 decimal places.
double round6(double x) noexcept;

std::string image_url(const std::string& blob_or_entry_id);

ojson entry_to_json(const EntryMeta& meta);
ojson hit_to_json(const SearchHit& hit, const VectorStore& store);
ojson result_to_json(const RetrievalResult& result, const VectorStore& store, bool with_timings);
ojson dual_to_json(const DualSearchResult& result, const VectorStore& store, bool with_timings);
ojson report_to_json(const EvaluationReport& report);
ojson reports_to_json(const std::vector<EvaluationReport>& reports);

// Plain-text rendering used by the CLI.
std::string result_to_text(const RetrievalResult& result, const VectorStore& store);
std::string dual_to_text(const DualSearchResult& result);

}  // namespace mirage
