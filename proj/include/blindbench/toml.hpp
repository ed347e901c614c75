#pragma once

// Minimal TOML reader for run configs. Supported: comments, [table] and
// [[array.of.tables]] headers, bare/quoted/dotted keys, basic and literal
// strings, integers, floats, booleans, (multi-line) arrays and inline tables.
// Not supported: multi-line strings, dates and times.

#include <filesystem>
#include <string_view>

#include <json.hpp>

namespace blindbench::toml {

/// Throws ConfigError with a line number on malformed input.
nlohmann::json parse(std::string_view text);
nlohmann::json parse_file(const std::filesystem::path& path);

}  // namespace blindbench::toml
