#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mirage/backends.hpp"

namespace mirage {

enum class PairType { kCaptionCaption, kImageCaptionReal, kImageCaptionSynthetic };
enum class Label { kSimilar, kDissimilar };
enum class OperandKind { kText, kImage };
enum class ThresholdStrategy { kMaxAccuracy, kMeanMidpoint };
enum class StdMode { kPopulation, kSample };

std::string_view to_string(PairType t) noexcept;
std::string_view to_string(Label l) noexcept;
std::string_view to_string(ThresholdStrategy s) noexcept;
std::optional<PairType> parse_pair_type(std::string_view s) noexcept;
std::optional<ThresholdStrategy> parse_strategy(std::string_view s) noexcept;

struct Operand {
  OperandKind kind = OperandKind::kText;
  std::string value;  // text, or an image file path
};

struct LabeledPair {
  Operand left;
  Operand right;
  Label label = Label::kSimilar;
  PairType pair_type = PairType::kCaptionCaption;
};

struct ScoredPair {
  double similarity = 0.0;
  Label label = Label::kSimilar;
};

struct ThresholdResult {
  double threshold = 0.0;
  double accuracy = 0.0;
};

struct EvaluationReport {
  PairType pair_type = PairType::kCaptionCaption;
  std::size_t n_similar = 0;
  std::size_t n_dissimilar = 0;
  double mean_similar = 0.0;
  double std_similar = 0.0;
  double mean_dissimilar = 0.0;
  double std_dissimilar = 0.0;
  double threshold = 0.0;
  double accuracy = 0.0;
  ThresholdStrategy threshold_strategy = ThresholdStrategy::kMaxAccuracy;
};

// Reads a pair file (JSON Lines). Relative image paths resolve against the
// file's directory. Throws ParseError naming the line, IoError.
std::vector<LabeledPair> parse_pairs(const std::filesystem::path& path);
LabeledPair parse_pair_line(const std::string& line, std::size_t line_no,
                            const std::filesystem::path& base_dir);

// One cosine score per pair, in input order. Texts go through encode_text and
// images through encode_image. Backend errors name the failing pair index.
std::vector<ScoredPair> pair_similarities(const std::vector<LabeledPair>& pairs,
                                          const Backends& backends, std::size_t batch_size = 32);

// Fraction of pairs classified correctly when "similar" means score >= threshold.
double accuracy_at(std::span<const ScoredPair> scores, double threshold);

// max_accuracy: candidates are -1, +1 and the midpoints between consecutive
// distinct scores; the best accuracy wins, ties going to the smallest
// threshold. mean_midpoint: (mean_similar + mean_dissimilar) / 2.
// Throws DegenerateLabels if either class is missing.
ThresholdResult find_threshold(std::span<const ScoredPair> scores, ThresholdStrategy strategy);

double mean_of(std::span<const double> values);
double std_of(std::span<const double> values, StdMode mode);

EvaluationReport evaluate_scores(PairType pair_type, std::span<const ScoredPair> scores,
                                 ThresholdStrategy strategy, StdMode std_mode = StdMode::kPopulation);

// Parses every pair file, scores the pairs and reports once per pair type
// present, in pair-type order.
std::vector<EvaluationReport> run_protocol(const std::vector<std::filesystem::path>& pair_files,
                                           const Backends& backends, ThresholdStrategy strategy,
                                           StdMode std_mode = StdMode::kPopulation);

// "0.770 ± 0.079 / 0.394 ± 0.063 | 0.582 | 99%"
std::string format_report_row(const EvaluationReport& report);
std::string format_report_table(const std::vector<EvaluationReport>& reports);

}  // namespace mirage
