#include "mirage/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include "json.hpp"
#include "mirage/error.hpp"
#include "mirage/query_algebra.hpp"
#include "mirage/vector_store.hpp"

namespace mirage {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string_view to_string(PairType t) noexcept {
  switch (t) {
    case PairType::kCaptionCaption: return "caption_caption";
    case PairType::kImageCaptionReal: return "image_caption_real";
    case PairType::kImageCaptionSynthetic: return "image_caption_synthetic";
  }
  return "unknown";
}

std::string_view to_string(Label l) noexcept {
  return l == Label::kSimilar ? "similar" : "dissimilar";
}

std::string_view to_string(ThresholdStrategy s) noexcept {
  return s == ThresholdStrategy::kMaxAccuracy ? "max_accuracy" : "mean_midpoint";
}

std::optional<PairType> parse_pair_type(std::string_view s) noexcept {
  for (auto t : {PairType::kCaptionCaption, PairType::kImageCaptionReal,
                 PairType::kImageCaptionSynthetic}) {
    if (s == to_string(t)) return t;
  }
  return std::nullopt;
}

std::optional<ThresholdStrategy> parse_strategy(std::string_view s) noexcept {
  if (s == "max_accuracy") return ThresholdStrategy::kMaxAccuracy;
  if (s == "mean_midpoint") return ThresholdStrategy::kMeanMidpoint;
  return std::nullopt;
}

// --- pair files ----------------------------------------------------------

LabeledPair parse_pair_line(const std::string& line, std::size_t line_no,
                            const fs::path& base_dir) {
  auto fail = [&](const std::string& why) -> Error {
    return Error(ErrorCode::kParseError, "line " + std::to_string(line_no) + ": " + why);
  };
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw fail(e.what());
  }
  if (!j.is_object()) throw fail("expected a JSON object");

  auto field = [&](const char* name, std::optional<std::string> fallback = {}) -> std::string {
    if (!j.contains(name)) {
      if (fallback) return *fallback;
      throw fail(std::string("missing field '") + name + "'");
    }
    if (!j[name].is_string()) throw fail(std::string("field '") + name + "' must be a string");
    return j[name].get<std::string>();
  };

  LabeledPair pair;
  const auto type = parse_pair_type(field("pair_type"));
  if (!type) throw fail("unknown pair_type '" + field("pair_type") + "'");
  pair.pair_type = *type;

  const std::string label = field("label");
  if (label == "similar") {
    pair.label = Label::kSimilar;
  } else if (label == "dissimilar") {
    pair.label = Label::kDissimilar;
  } else {
    throw fail("unknown label '" + label + "'");
  }

  auto operand = [&](const char* value_key, const char* kind_key) {
    Operand op;
    const std::string kind = field(kind_key, "text");
    if (kind == "text") {
      op.kind = OperandKind::kText;
    } else if (kind == "image") {
      op.kind = OperandKind::kImage;
    } else {
      throw fail("unknown operand kind '" + kind + "'");
    }
    op.value = field(value_key);
    if (trim(op.value).empty()) throw fail(std::string("empty operand '") + value_key + "'");
    if (op.kind == OperandKind::kImage && fs::path(op.value).is_relative()) {
      op.value = (base_dir / op.value).string();
    }
    return op;
  };
  pair.left = operand("left", "left_kind");
  pair.right = operand("right", "right_kind");

  const int images = (pair.left.kind == OperandKind::kImage) + (pair.right.kind == OperandKind::kImage);
  const bool consistent = pair.pair_type == PairType::kCaptionCaption ? images == 0 : images == 1;
  if (!consistent) {
    throw fail("operand kinds do not match pair_type " + std::string(to_string(pair.pair_type)));
  }
  return pair;
}

std::vector<LabeledPair> parse_pairs(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open pair file '" + path.string() + "'");
  std::vector<LabeledPair> pairs;
  std::string line;
  std::size_t line_no = 0;
  const fs::path base = path.parent_path();
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      pairs.push_back(parse_pair_line(line, line_no, base));
    } catch (const Error& e) {
      throw Error(e.code(), path.string() + ":" + e.what());
    }
  }
  return pairs;
}

// --- scoring -------------------------------------------------------------

std::vector<ScoredPair> pair_similarities(const std::vector<LabeledPair>& pairs,
                                          const Backends& backends, std::size_t batch_size) {
  if (batch_size == 0) batch_size = 1;
  // Flatten the operands: slot 2i is the left side of pair i, 2i+1 the right.
  std::vector<std::size_t> text_slots;
  std::vector<std::size_t> image_slots;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    (pairs[i].left.kind == OperandKind::kText ? text_slots : image_slots).push_back(2 * i);
    (pairs[i].right.kind == OperandKind::kText ? text_slots : image_slots).push_back(2 * i + 1);
  }
  auto operand_at = [&](std::size_t slot) -> const Operand& {
    return slot % 2 == 0 ? pairs[slot / 2].left : pairs[slot / 2].right;
  };

  std::vector<Embedding> embedded(2 * pairs.size());
  auto embed_batches = [&](const std::vector<std::size_t>& slots, bool images) {
    for (std::size_t start = 0; start < slots.size(); start += batch_size) {
      const std::size_t end = std::min(slots.size(), start + batch_size);
      std::vector<Bytes> blobs;
      std::vector<std::string> texts;
      for (std::size_t s = start; s < end; ++s) {
        const Operand& op = operand_at(slots[s]);
        if (!images) {
          texts.push_back(op.value);
          continue;
        }
        try {
          blobs.push_back(read_file_bytes(op.value));
        } catch (const Error& e) {
          throw Error(e.code(), "pair " + std::to_string(slots[s] / 2) + ": " + e.what());
        }
      }
      std::vector<Embedding> out;
      try {
        out = images ? backends.encode_image(blobs) : backends.encode_text(texts);
      } catch (const Error& e) {
        const std::size_t a = slots[start] / 2;
        const std::size_t b = slots[end - 1] / 2;
        const std::string where = a == b ? "pair " + std::to_string(a)
                                         : "pairs " + std::to_string(a) + "-" + std::to_string(b);
        throw Error(e.code(), where + ": " + e.what());
      }
      for (std::size_t s = start; s < end; ++s) embedded[slots[s]] = std::move(out[s - start]);
    }
  };
  embed_batches(text_slots, false);
  embed_batches(image_slots, true);

  std::vector<ScoredPair> scores;
  scores.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    scores.push_back(ScoredPair{cosine(embedded[2 * i], embedded[2 * i + 1]), pairs[i].label});
  }
  return scores;
}

// --- threshold calibration -----------------------------------------------

namespace {

struct Split {
  std::vector<double> similar;
  std::vector<double> dissimilar;
};

Split split_sorted(std::span<const ScoredPair> scores) {
  Split s;
  for (const auto& p : scores) {
    (p.label == Label::kSimilar ? s.similar : s.dissimilar).push_back(p.similarity);
  }
  if (s.similar.empty() || s.dissimilar.empty()) {
    throw Error(ErrorCode::kDegenerateLabels,
                "threshold calibration needs both similar and dissimilar pairs");
  }
  std::sort(s.similar.begin(), s.similar.end());
  std::sort(s.dissimilar.begin(), s.dissimilar.end());
  return s;
}

// Correct classifications at `t`, counted on sorted class lists.
std::size_t correct_at(const Split& s, double t) {
  const auto sim_above = static_cast<std::size_t>(
      s.similar.end() - std::lower_bound(s.similar.begin(), s.similar.end(), t));
  const auto dis_below = static_cast<std::size_t>(
      std::lower_bound(s.dissimilar.begin(), s.dissimilar.end(), t) - s.dissimilar.begin());
  return sim_above + dis_below;
}

}  // namespace

double accuracy_at(std::span<const ScoredPair> scores, double threshold) {
  if (scores.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& p : scores) {
    const bool predicted_similar = p.similarity >= threshold;
    correct += predicted_similar == (p.label == Label::kSimilar);
  }
  return static_cast<double>(correct) / static_cast<double>(scores.size());
}

double mean_of(std::span<const double> values) {
  if (values.empty()) return 0.0;
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

double std_of(std::span<const double> values, StdMode mode) {
  const std::size_t n = values.size();
  if (n == 0 || (mode == StdMode::kSample && n < 2)) return 0.0;
  const double m = mean_of(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(mode == StdMode::kSample ? n - 1 : n));
}

ThresholdResult find_threshold(std::span<const ScoredPair> scores, ThresholdStrategy strategy) {
  const Split split = split_sorted(scores);
  const auto total = static_cast<double>(scores.size());

  if (strategy == ThresholdStrategy::kMeanMidpoint) {
    const double t = (mean_of(split.similar) + mean_of(split.dissimilar)) / 2.0;
    return {t, static_cast<double>(correct_at(split, t)) / total};
  }

  std::vector<double> values;
  values.reserve(scores.size());
  for (const auto& p : scores) values.push_back(p.similarity);
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());

  std::vector<double> candidates = {-1.0, 1.0};
  for (std::size_t i = 0; i + 1 < values.size(); ++i) {
    double mid = values[i] + (values[i + 1] - values[i]) / 2.0;
    // Adjacent doubles: the midpoint may round onto the lower value.
    if (mid <= values[i]) mid = values[i + 1];
    candidates.push_back(mid);
  }
  std::sort(candidates.begin(), candidates.end());

  ThresholdResult best{candidates.front(), -1.0};
  std::size_t best_correct = 0;
  bool have = false;
  for (double t : candidates) {
    const std::size_t c = correct_at(split, t);
    if (!have || c > best_correct) {
      best = {t, 0.0};
      best_correct = c;
      have = true;
    }
  }
  best.accuracy = static_cast<double>(best_correct) / total;
  return best;
}

EvaluationReport evaluate_scores(PairType pair_type, std::span<const ScoredPair> scores,
                                 ThresholdStrategy strategy, StdMode std_mode) {
  const Split split = split_sorted(scores);
  EvaluationReport r;
  r.pair_type = pair_type;
  r.threshold_strategy = strategy;
  r.n_similar = split.similar.size();
  r.n_dissimilar = split.dissimilar.size();
  // Sorted inputs make the statistics independent of pair order.
  r.mean_similar = mean_of(split.similar);
  r.std_similar = std_of(split.similar, std_mode);
  r.mean_dissimilar = mean_of(split.dissimilar);
  r.std_dissimilar = std_of(split.dissimilar, std_mode);
  const ThresholdResult t = find_threshold(scores, strategy);
  r.threshold = t.threshold;
  r.accuracy = t.accuracy;
  return r;
}

std::vector<EvaluationReport> run_protocol(const std::vector<fs::path>& pair_files,
                                           const Backends& backends, ThresholdStrategy strategy,
                                           StdMode std_mode) {
  std::vector<LabeledPair> pairs;
  for (const auto& f : pair_files) {
    auto more = parse_pairs(f);
    pairs.insert(pairs.end(), std::make_move_iterator(more.begin()),
                 std::make_move_iterator(more.end()));
  }
  const auto scores = pair_similarities(pairs, backends);

  std::map<PairType, std::vector<ScoredPair>> by_type;
  for (std::size_t i = 0; i < pairs.size(); ++i) by_type[pairs[i].pair_type].push_back(scores[i]);

  std::vector<EvaluationReport> reports;
  for (const auto& [type, group] : by_type) {
    try {
      reports.push_back(evaluate_scores(type, group, strategy, std_mode));
    } catch (const Error& e) {
      throw Error(e.code(), std::string(to_string(type)) + ": " + e.what());
    }
  }
  return reports;
}

std::string format_report_row(const EvaluationReport& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%.3f ± %.3f / %.3f ± %.3f | %.3f | %.0f%%", r.mean_similar,
                r.std_similar, r.mean_dissimilar, r.std_dissimilar, r.threshold,
                r.accuracy * 100.0);
  return buf;
}

std::string format_report_table(const std::vector<EvaluationReport>& reports) {
  std::string out = "pair_type                | similar / dissimilar (mean ± std)   | threshold | accuracy\n";
  for (const auto& r : reports) {
    char name[32];
    std::snprintf(name, sizeof name, "%-24s", std::string(to_string(r.pair_type)).c_str());
    out += name;
    out += " | ";
    out += format_report_row(r);
    char tail[96];
    std::snprintf(tail, sizeof tail, "\n%-24s   n=%zu/%zu strategy=%s accuracy=%.2f\n", "",
                  r.n_similar, r.n_dissimilar, std::string(to_string(r.threshold_strategy)).c_str(),
                  r.accuracy);
    out += tail;
  }
  return out;
}

}  // namespace mirage
