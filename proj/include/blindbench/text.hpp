#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace blindbench {

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);
std::vector<std::string> split(std::string_view s, std::string_view sep);
std::string join(const std::vector<std::string>& items, std::string_view sep);
bool starts_with_ci(std::string_view s, std::string_view prefix);

/// Parses the whole (trimmed) string as a finite double.
std::optional<double> parse_double(std::string_view s);

/// Shortest decimal string that round-trips to the same double.
std::string shortest_repr(double v);

/// Prompt rendering: at most 6 significant digits, plain decimal notation
/// for |v| < 1e6.
std::string format_prompt_value(double v);

/// Splits a UTF-8 string into code points (each returned as its byte string).
/// Malformed sequences are returned one byte at a time.
std::vector<std::string> utf8_code_points(std::string_view s);

/// Encodes a single code point as UTF-8.
std::string utf8_encode(char32_t cp);

}  // namespace blindbench
