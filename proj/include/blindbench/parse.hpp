#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace blindbench {

enum class ExtractionRule { kBracketSyntax, kLastNumber, kBareNumber };

std::string_view to_string(ExtractionRule rule);
std::optional<ExtractionRule> extraction_rule_from_string(std::string_view s);

struct ParsedPrediction {
  double value = 0.0;
  ExtractionRule rule = ExtractionRule::kBareNumber;
  /// Byte offsets [begin, end) of the number in the raw text.
  std::size_t span_begin = 0;
  std::size_t span_end = 0;
};

/// Values beyond this magnitude are parse failures.
inline constexpr double kMaxPredictionMagnitude = 1e9;

/// Pulls one number out of model output. Rules, first match wins:
///   1. the last bracketed number "[x]";
///   2. the whole trimmed text when it is a single number;
///   3. the last number anywhere in the text.
/// Accepts signs (including U+2212), decimals, exponents and thousands
/// separators. Throws ParseFailure when nothing usable is found.
ParsedPrediction parse_prediction(std::string_view raw);

std::optional<ParsedPrediction> try_parse_prediction(std::string_view raw);

}  // namespace blindbench
