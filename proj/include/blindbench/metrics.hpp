#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "blindbench/dataset.hpp"
#include "blindbench/parse.hpp"

namespace blindbench {

struct PredictionRecord {
  MoleculeId molecule_id = 0;
  int run_index = 0;
  std::string raw_text;
  std::optional<ParsedPrediction> parsed;
  /// Parsed value mapped back to the dataset's scale (inverse-transformed
  /// when the level transforms labels).
  std::optional<double> value_original_scale;
  double truth_original_scale = 0.0;
  /// Truth on the scale the model saw in the prompt.
  double truth_prompt_scale = 0.0;
  /// Source text of the original truth, for significant-digit eligibility.
  std::string truth_text;
  bool label_transformed = false;
  bool valid = false;
  /// Why the record is invalid (parse failure, refusal, ...); empty if valid.
  std::string error;
};

nlohmann::json to_json(const PredictionRecord& r);
PredictionRecord prediction_record_from_json(const nlohmann::json& j);

/// Sample Pearson correlation. Throws UndefinedCorrelationError for fewer
/// than two pairs or a constant series.
double pearson(std::span<const std::pair<double, double>> pairs);

/// Fraction of all records whose original-scale absolute error is <= each
/// threshold. Invalid records never count as below a threshold, so the curve
/// tops out at n_valid / n_total. Thresholds must ascend.
std::vector<std::pair<double, double>> cumulative_error_curve(
    std::span<const PredictionRecord> records, std::span<const double> thresholds);

enum class DigitMatch { kMatch, kNoMatch, kIneligible };

/// Significant digits in a decimal rendering. Trailing zeros count only when
/// a decimal point is present ("1.20" -> 3, "1200" -> 2). Zero has none.
int significant_digit_count(std::string_view decimal_text);

/// Compares sign, decimal exponent and the first `n` significant digits
/// (truncated, not rounded). Ineligible when the truth has fewer than `n`
/// significant digits; `truth_text` is its recorded rendering when known.
DigitMatch significant_digit_match(double pred, double truth, int n,
                                   std::optional<std::string_view> truth_text = {});

struct DigitMatchCounts {
  std::size_t matches = 0;
  std::size_t eligible = 0;
  double rate() const {
    return eligible ? static_cast<double>(matches) / static_cast<double>(eligible)
                    : 0.0;
  }
};

/// Exact-match counts over valid records, comparing the parsed value with the
/// truth on the prompt's scale.
std::map<int, DigitMatchCounts> memorization_summary(
    std::span<const PredictionRecord> records, std::span<const int> n_values);

/// matches at n=4 over matches at n=3, when the latter is nonzero.
std::optional<double> retention(const std::map<int, DigitMatchCounts>& counts);

struct MetricsSummary {
  std::optional<double> pearson_r;
  bool correlation_undefined = false;
  /// r after dropping predictions further than one truth range outside the
  /// truth interval.
  std::optional<double> pearson_r_capped;
  std::optional<double> mae;
  std::size_t n_valid = 0;
  std::size_t n_total = 0;
  DigitMatchCounts exact_match_3;
  DigitMatchCounts exact_match_4;
};

MetricsSummary summarize(std::span<const PredictionRecord> records);

nlohmann::json to_json(const MetricsSummary& s);
MetricsSummary metrics_summary_from_json(const nlohmann::json& j);

}  // namespace blindbench
