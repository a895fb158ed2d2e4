#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include "mirage/embedding.hpp"

namespace mirage {

inline constexpr std::size_t kDefaultK = 5;
inline constexpr double kDegenerateNorm = 1e-6;

// A user query, optionally carrying the subtract/add pair of a dual search.
struct ConceptQuery {
  std::string text;
  std::optional<std::string> subtract_term;
  std::optional<std::string> add_term;
  std::size_t k = kDefaultK;

  bool is_dual() const noexcept { return subtract_term.has_value() && add_term.has_value(); }

  // Throws InvalidArgument for empty text, k == 0 or a lone subtract/add term.
  void validate() const;
};

// normalize(original - subtract + add). Computed as original + (add - subtract)
// so that equal terms cancel exactly and return `original` unchanged.
// Throws DegenerateQuery when the sum's norm is below 1e-6, DimensionMismatch.
Embedding compose_modified(const Embedding& original, const Embedding& subtract,
                           const Embedding& add);

// The unnormalized sum used by compose_modified().
std::vector<double> compose_modified_raw(const Embedding& original, const Embedding& subtract,
                                         const Embedding& add);

// Text counterpart of compose_modified() for the image synthesizer: replaces
// the first case-insensitive occurrence of the subtract term with the add
// term, or appends ", <add>" when the term does not occur.
// Throws MissingTerms.
std::string modified_prompt_text(const ConceptQuery& query);

std::string trim(const std::string& s);

}  // namespace mirage
