#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace blindbench::csv {

using Row = std::vector<std::string>;

/// Reads comma-separated rows. Handles quoted fields (with "" escapes and
/// embedded newlines), CRLF line endings and a leading UTF-8 BOM. Blank
/// lines are skipped.
std::vector<Row> read(std::istream& in);

/// Quotes the field only when it contains a comma, quote or newline.
std::string escape(std::string_view field);

void write_row(std::ostream& out, const Row& row);

}  // namespace blindbench::csv
