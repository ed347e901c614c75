#include "blindbench/parse.hpp"

#include <cmath>
#include <vector>

#include "blindbench/error.hpp"
#include "blindbench/text.hpp"

namespace blindbench {

std::string_view to_string(ExtractionRule rule) {
  switch (rule) {
    case ExtractionRule::kBracketSyntax:
      return "bracket-syntax";
    case ExtractionRule::kLastNumber:
      return "last-number";
    case ExtractionRule::kBareNumber:
      return "bare-number";
  }
  return "unknown";
}

std::optional<ExtractionRule> extraction_rule_from_string(std::string_view s) {
  for (auto r : {ExtractionRule::kBracketSyntax, ExtractionRule::kLastNumber,
                 ExtractionRule::kBareNumber}) {
    if (to_string(r) == s) return r;
  }
  return std::nullopt;
}

namespace {

constexpr std::string_view kUnicodeMinus = "\xE2\x88\x92";

struct NumberMatch {
  std::size_t begin;
  std::size_t end;
  std::string normalized;
};

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_alnum(char c) {
  return is_digit(c) || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

std::size_t count_digits(std::string_view t, std::size_t pos) {
  std::size_t n = 0;
  while (pos + n < t.size() && is_digit(t[pos + n])) ++n;
  return n;
}

// Scans one number starting exactly at `pos`.
std::optional<NumberMatch> scan_number(std::string_view t, std::size_t pos) {
  NumberMatch m{pos, pos, {}};
  std::size_t i = pos;
  if (t.compare(i, kUnicodeMinus.size(), kUnicodeMinus) == 0) {
    m.normalized += '-';
    i += kUnicodeMinus.size();
  } else if (i < t.size() && (t[i] == '-' || t[i] == '+')) {
    if (t[i] == '-') m.normalized += '-';
    ++i;
  }

  bool mantissa_digits = false;
  const std::size_t lead = count_digits(t, i);
  if (lead > 0) {
    mantissa_digits = true;
    m.normalized.append(t.substr(i, lead));
    i += lead;
    // Thousands groups: 1-3 leading digits, then ",ddd" groups.
    if (lead <= 3) {
      while (i + 4 <= t.size() && t[i] == ',' && count_digits(t, i + 1) == 3) {
        m.normalized.append(t.substr(i + 1, 3));
        i += 4;
      }
    }
  }
  if (i < t.size() && t[i] == '.' &&
      count_digits(t, i + 1) > 0) {
    const std::size_t frac = count_digits(t, i + 1);
    m.normalized += '.';
    m.normalized.append(t.substr(i + 1, frac));
    i += 1 + frac;
    mantissa_digits = true;
  }
  if (!mantissa_digits) return std::nullopt;
  if (i < t.size() && (t[i] == 'e' || t[i] == 'E')) {
    std::size_t j = i + 1;
    if (j < t.size() && (t[j] == '+' || t[j] == '-')) ++j;
    const std::size_t exp_digits = count_digits(t, j);
    if (exp_digits > 0) {
      m.normalized.append(t.substr(i, j + exp_digits - i));
      i = j + exp_digits;
    }
  }
  m.end = i;
  return m;
}

bool starts_number(std::string_view t, std::size_t i) {
  auto digit_or_point_at = [&](std::size_t k) {
    return k < t.size() &&
           (is_digit(t[k]) ||
            (t[k] == '.' && k + 1 < t.size() && is_digit(t[k + 1])));
  };
  if (digit_or_point_at(i)) return true;
  const bool sign_boundary = i == 0 || !is_alnum(t[i - 1]);
  if (!sign_boundary) return false;
  if (t[i] == '-' || t[i] == '+') return digit_or_point_at(i + 1);
  if (t.compare(i, kUnicodeMinus.size(), kUnicodeMinus) == 0) {
    return digit_or_point_at(i + kUnicodeMinus.size());
  }
  return false;
}

std::vector<NumberMatch> all_numbers(std::string_view t) {
  std::vector<NumberMatch> out;
  std::size_t i = 0;
  while (i < t.size()) {
    if (starts_number(t, i)) {
      if (auto m = scan_number(t, i)) {
        i = m->end;
        out.push_back(std::move(*m));
        continue;
      }
    }
    ++i;
  }
  return out;
}

std::size_t skip_spaces(std::string_view t, std::size_t i) {
  while (i < t.size() && (t[i] == ' ' || t[i] == '\t')) ++i;
  return i;
}

std::optional<NumberMatch> last_bracketed(std::string_view t) {
  std::optional<NumberMatch> found;
  for (std::size_t open = t.find('['); open != std::string_view::npos;
       open = t.find('[', open + 1)) {
    const std::size_t start = skip_spaces(t, open + 1);
    if (start >= t.size() || !starts_number(t, start)) continue;
    auto m = scan_number(t, start);
    if (!m) continue;
    const std::size_t close = skip_spaces(t, m->end);
    if (close < t.size() && t[close] == ']') found = std::move(m);
  }
  return found;
}

ParsedPrediction finish(const NumberMatch& m, ExtractionRule rule) {
  const auto v = parse_double(m.normalized);
  if (!v) throw ParseFailure("number '" + m.normalized + "' is not finite");
  if (std::fabs(*v) > kMaxPredictionMagnitude) {
    throw ParseFailure("magnitude of " + m.normalized + " exceeds 1e9");
  }
  return {*v, rule, m.begin, m.end};
}

}  // namespace

ParsedPrediction parse_prediction(std::string_view raw) {
  if (auto m = last_bracketed(raw)) {
    return finish(*m, ExtractionRule::kBracketSyntax);
  }
  const auto trimmed = trim(raw);
  const auto offset =
      trimmed.empty() ? 0 : static_cast<std::size_t>(trimmed.data() - raw.data());
  if (!trimmed.empty() && starts_number(raw, offset)) {
    if (auto m = scan_number(raw, offset); m && m->end == offset + trimmed.size()) {
      return finish(*m, ExtractionRule::kBareNumber);
    }
  }
  auto numbers = all_numbers(raw);
  if (numbers.empty()) throw ParseFailure("no number found in model output");
  return finish(numbers.back(), ExtractionRule::kLastNumber);
}

std::optional<ParsedPrediction> try_parse_prediction(std::string_view raw) {
  try {
    return parse_prediction(raw);
  } catch (const ParseFailure&) {
    return std::nullopt;
  }
}

}  // namespace blindbench
