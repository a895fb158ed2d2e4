#include "mirage/query_algebra.hpp"

#include <algorithm>
#include <cctype>

#include "mirage/error.hpp"

namespace mirage {

namespace {

char ascii_lower(char c) {
  return static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
}

}  // namespace

std::string trim(const std::string& s) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  auto first = std::find_if_not(s.begin(), s.end(), is_space);
  auto last = std::find_if_not(s.rbegin(), s.rend(), is_space).base();
  return first < last ? std::string(first, last) : std::string();
}

void ConceptQuery::validate() const {
  if (trim(text).empty()) throw Error(ErrorCode::kInvalidArgument, "query text is empty");
  if (k == 0) throw Error(ErrorCode::kInvalidK, "k must be at least 1");
  if (subtract_term.has_value() != add_term.has_value()) {
    throw Error(ErrorCode::kMissingTerms, "subtract and add terms must be given together");
  }
  if (is_dual() && (trim(*subtract_term).empty() || trim(*add_term).empty())) {
    throw Error(ErrorCode::kMissingTerms, "subtract and add terms must be non-empty");
  }
}

std::vector<double> compose_modified_raw(const Embedding& original, const Embedding& subtract,
                                         const Embedding& add) {
  if (original.dim() != subtract.dim() || original.dim() != add.dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "query and term embeddings differ in dimension");
  }
  std::vector<double> out(original.dim());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = original[i] + (add[i] - subtract[i]);
  }
  return out;
}

Embedding compose_modified(const Embedding& original, const Embedding& subtract,
                           const Embedding& add) {
  auto raw = compose_modified_raw(original, subtract, add);
  if (l2_norm(raw) < kDegenerateNorm) {
    throw Error(ErrorCode::kDegenerateQuery,
                "query and terms cancel out; the modified embedding has no direction");
  }
  return normalize(raw);
}

std::string modified_prompt_text(const ConceptQuery& query) {
  if (!query.is_dual()) throw Error(ErrorCode::kMissingTerms, "subtract and add terms required");
  const std::string& text = query.text;
  const std::string& sub = *query.subtract_term;
  const std::string& add = *query.add_term;

  if (!sub.empty()) {
    auto it = std::search(text.begin(), text.end(), sub.begin(), sub.end(),
                          [](char a, char b) { return ascii_lower(a) == ascii_lower(b); });
    if (it != text.end()) {
      std::string out(text.begin(), it);
      out += add;
      out.append(it + static_cast<std::ptrdiff_t>(sub.size()), text.end());
      return out;
    }
  }
  return text + ", " + add;
}

}  // namespace mirage
