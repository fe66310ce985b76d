#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace skilltrace::csv {

// RFC 4180 subset: comma delimiter, double-quote quoting with "" escapes,
// LF or CRLF record ends, quoted fields may embed commas/quotes/newlines.
std::vector<std::vector<std::string>> parse(std::istream& in);
std::vector<std::vector<std::string>> parse_string(const std::string& text);

// Quotes the field only when needed (comma, quote, CR or LF present).
std::string escape_field(const std::string& field);
void write_row(std::ostream& out, const std::vector<std::string>& fields);

// Shortest round-trip decimal form (std::to_chars); integral values print
// without a trailing ".0".
std::string format_double(double value);

std::optional<double> parse_double(const std::string& text);
std::optional<std::int64_t> parse_i64(const std::string& text);

}  // namespace skilltrace::csv
