#include "blindbench/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "blindbench/error.hpp"
#include "blindbench/text.hpp"

namespace blindbench {

double pearson(std::span<const std::pair<double, double>> pairs) {
  if (pairs.size() < 2) {
    throw UndefinedCorrelationError("correlation needs at least two pairs");
  }
  using wide = long double;
  const wide n = static_cast<wide>(pairs.size());
  wide mx = 0.0L;
  wide my = 0.0L;
  for (const auto& [x, y] : pairs) {
    mx += x;
    my += y;
  }
  mx /= n;
  my /= n;
  wide sxy = 0.0L;
  wide sxx = 0.0L;
  wide syy = 0.0L;
  for (const auto& [x, y] : pairs) {
    sxy += (x - mx) * (y - my);
    sxx += (x - mx) * (x - mx);
    syy += (y - my) * (y - my);
  }
  if (sxx == 0.0L || syy == 0.0L) {
    throw UndefinedCorrelationError("correlation of a constant series");
  }
  return std::clamp(static_cast<double>(sxy / std::sqrt(sxx * syy)), -1.0, 1.0);
}

std::vector<std::pair<double, double>> cumulative_error_curve(
    std::span<const PredictionRecord> records,
    std::span<const double> thresholds) {
  std::vector<double> errors;
  for (const auto& r : records) {
    if (r.valid && r.value_original_scale) {
      errors.push_back(std::fabs(*r.value_original_scale - r.truth_original_scale));
    }
  }
  if (errors.empty()) throw EmptyInputError("no valid records for error curve");
  if (!std::is_sorted(thresholds.begin(), thresholds.end())) {
    throw std::invalid_argument("thresholds must be ascending");
  }
  std::sort(errors.begin(), errors.end());
  const double total = static_cast<double>(records.size());
  std::vector<std::pair<double, double>> curve;
  curve.reserve(thresholds.size());
  for (double t : thresholds) {
    const auto below = std::upper_bound(errors.begin(), errors.end(), t) - errors.begin();
    curve.emplace_back(t, static_cast<double>(below) / total);
  }
  return curve;
}

namespace {

struct Decimal {
  bool negative = false;
  std::string digits;  // significant digits, no leading zeros
  int exponent = 0;    // decimal exponent of the first significant digit
  int significant = 0;
};

// Parses "[-]mantissa[e[+-]exp]" text into digit form. Returns nullopt for
// zero or unparsable text.
std::optional<Decimal> to_decimal(std::string_view text) {
  text = trim(text);
  Decimal d;
  if (!text.empty() && (text.front() == '-' || text.front() == '+')) {
    d.negative = text.front() == '-';
    text.remove_prefix(1);
  }
  std::string_view mantissa = text;
  int exp_part = 0;
  if (const auto e = text.find_first_of("eE"); e != std::string_view::npos) {
    mantissa = text.substr(0, e);
    const auto ev = parse_double(text.substr(e + 1));
    if (!ev) return std::nullopt;
    exp_part = static_cast<int>(*ev);
  }
  const auto point = mantissa.find('.');
  const bool has_point = point != std::string_view::npos;
  const std::size_t int_len = has_point ? point : mantissa.size();

  std::string all;
  for (char c : mantissa) {
    if (c == '.') continue;
    if (c < '0' || c > '9') return std::nullopt;
    all += c;
  }
  const auto first = all.find_first_not_of('0');
  if (first == std::string::npos) return std::nullopt;
  d.exponent = static_cast<int>(int_len) - 1 - static_cast<int>(first) + exp_part;
  d.digits = all.substr(first);
  if (!has_point) {
    while (d.digits.size() > 1 && d.digits.back() == '0') d.digits.pop_back();
  }
  d.significant = static_cast<int>(d.digits.size());
  return d;
}

}  // namespace

int significant_digit_count(std::string_view decimal_text) {
  const auto d = to_decimal(decimal_text);
  return d ? d->significant : 0;
}

DigitMatch significant_digit_match(double pred, double truth, int n,
                                   std::optional<std::string_view> truth_text) {
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  const std::string truth_repr =
      truth_text ? std::string(*truth_text) : shortest_repr(truth);
  const auto t = to_decimal(truth_repr);
  if (!t || t->significant < n) return DigitMatch::kIneligible;
  const auto p = to_decimal(shortest_repr(pred));
  if (!p) return DigitMatch::kNoMatch;
  if (p->negative != t->negative || p->exponent != t->exponent) {
    return DigitMatch::kNoMatch;
  }
  auto head = [n](std::string digits) {
    digits.resize(static_cast<std::size_t>(n), '0');
    return digits;
  };
  return head(p->digits) == head(t->digits) ? DigitMatch::kMatch
                                            : DigitMatch::kNoMatch;
}

std::map<int, DigitMatchCounts> memorization_summary(
    std::span<const PredictionRecord> records, std::span<const int> n_values) {
  std::map<int, DigitMatchCounts> out;
  for (int n : n_values) out[n];
  for (const auto& r : records) {
    if (!r.valid || !r.parsed) continue;
    std::optional<std::string_view> truth_text;
    if (!r.label_transformed && !r.truth_text.empty()) truth_text = r.truth_text;
    for (int n : n_values) {
      const auto m = significant_digit_match(r.parsed->value, r.truth_prompt_scale,
                                             n, truth_text);
      if (m == DigitMatch::kIneligible) continue;
      auto& c = out[n];
      ++c.eligible;
      if (m == DigitMatch::kMatch) ++c.matches;
    }
  }
  return out;
}

std::optional<double> retention(const std::map<int, DigitMatchCounts>& counts) {
  const auto m3 = counts.find(3);
  const auto m4 = counts.find(4);
  if (m3 == counts.end() || m4 == counts.end() || m3->second.matches == 0) {
    return std::nullopt;
  }
  return static_cast<double>(m4->second.matches) /
         static_cast<double>(m3->second.matches);
}

MetricsSummary summarize(std::span<const PredictionRecord> records) {
  MetricsSummary s;
  s.n_total = records.size();
  std::vector<std::pair<double, double>> pairs;
  double tmin = 0.0;
  double tmax = 0.0;
  bool first = true;
  for (const auto& r : records) {
    if (first) {
      tmin = tmax = r.truth_original_scale;
      first = false;
    }
    tmin = std::min(tmin, r.truth_original_scale);
    tmax = std::max(tmax, r.truth_original_scale);
    if (r.valid && r.value_original_scale) {
      pairs.emplace_back(*r.value_original_scale, r.truth_original_scale);
    }
  }
  s.n_valid = pairs.size();
  if (!pairs.empty()) {
    double sum = 0.0;
    for (const auto& [p, t] : pairs) sum += std::fabs(p - t);
    s.mae = sum / static_cast<double>(pairs.size());
  }
  try {
    s.pearson_r = pearson(pairs);
  } catch (const UndefinedCorrelationError&) {
    s.correlation_undefined = true;
  }
  const double range = tmax - tmin;
  std::vector<std::pair<double, double>> capped;
  for (const auto& pt : pairs) {
    if (pt.first >= tmin - range && pt.first <= tmax + range) capped.push_back(pt);
  }
  try {
    s.pearson_r_capped = pearson(capped);
  } catch (const UndefinedCorrelationError&) {
  }
  const int ns[] = {3, 4};
  const auto counts = memorization_summary(records, ns);
  s.exact_match_3 = counts.at(3);
  s.exact_match_4 = counts.at(4);
  return s;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

nlohmann::json optional_number(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json();
}

std::optional<double> number_or_null(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

nlohmann::json counts_json(const DigitMatchCounts& c) {
  return {{"matches", c.matches}, {"eligible", c.eligible}, {"rate", c.rate()}};
}

DigitMatchCounts counts_from_json(const nlohmann::json& j) {
  return {j.at("matches").get<std::size_t>(), j.at("eligible").get<std::size_t>()};
}

}  // namespace

nlohmann::json to_json(const PredictionRecord& r) {
  nlohmann::json parsed;
  if (r.parsed) {
    parsed = {{"value", r.parsed->value},
              {"rule", std::string(to_string(r.parsed->rule))},
              {"span", {r.parsed->span_begin, r.parsed->span_end}}};
  }
  return {{"molecule_id", r.molecule_id},
          {"run_index", r.run_index},
          {"raw_text", r.raw_text},
          {"parsed", parsed},
          {"value_original_scale", optional_number(r.value_original_scale)},
          {"truth_original_scale", r.truth_original_scale},
          {"truth_prompt_scale", r.truth_prompt_scale},
          {"truth_text", r.truth_text},
          {"label_transformed", r.label_transformed},
          {"valid", r.valid},
          {"error", r.error}};
}

PredictionRecord prediction_record_from_json(const nlohmann::json& j) {
  PredictionRecord r;
  r.molecule_id = j.at("molecule_id").get<MoleculeId>();
  r.run_index = j.at("run_index").get<int>();
  r.raw_text = j.at("raw_text").get<std::string>();
  if (const auto& p = j.at("parsed"); !p.is_null()) {
    ParsedPrediction pp;
    pp.value = p.at("value").get<double>();
    const auto rule = extraction_rule_from_string(p.at("rule").get<std::string>());
    if (!rule) throw Error("unknown extraction rule in record");
    pp.rule = *rule;
    pp.span_begin = p.at("span").at(0).get<std::size_t>();
    pp.span_end = p.at("span").at(1).get<std::size_t>();
    r.parsed = pp;
  }
  r.value_original_scale = number_or_null(j, "value_original_scale");
  r.truth_original_scale = j.at("truth_original_scale").get<double>();
  r.truth_prompt_scale = j.at("truth_prompt_scale").get<double>();
  r.truth_text = j.at("truth_text").get<std::string>();
  r.label_transformed = j.at("label_transformed").get<bool>();
  r.valid = j.at("valid").get<bool>();
  r.error = j.at("error").get<std::string>();
  return r;
}

nlohmann::json to_json(const MetricsSummary& s) {
  return {{"pearson_r", optional_number(s.pearson_r)},
          {"correlation_undefined", s.correlation_undefined},
          {"pearson_r_capped", optional_number(s.pearson_r_capped)},
          {"mae", optional_number(s.mae)},
          {"n_valid", s.n_valid},
          {"n_total", s.n_total},
          {"exact_match_3", counts_json(s.exact_match_3)},
          {"exact_match_4", counts_json(s.exact_match_4)}};
}

MetricsSummary metrics_summary_from_json(const nlohmann::json& j) {
  MetricsSummary s;
  s.pearson_r = number_or_null(j, "pearson_r");
  s.correlation_undefined = j.at("correlation_undefined").get<bool>();
  s.pearson_r_capped = number_or_null(j, "pearson_r_capped");
  s.mae = number_or_null(j, "mae");
  s.n_valid = j.at("n_valid").get<std::size_t>();
  s.n_total = j.at("n_total").get<std::size_t>();
  s.exact_match_3 = counts_from_json(j.at("exact_match_3"));
  s.exact_match_4 = counts_from_json(j.at("exact_match_4"));
  return s;
}

}  // namespace blindbench
