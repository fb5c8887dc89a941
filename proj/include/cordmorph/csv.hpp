#pragma once

#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

namespace cordmorph::csv {

using Row = std::vector<std::string>;

/// RFC 4180 reader: quoted fields, doubled quotes, CRLF or LF line ends.
/// Throws InvalidArgument on an unterminated quote.
std::vector<Row> parse(std::string_view text);

/// Quotes the field only when it contains a comma, quote or line break.
std::string escape(std::string_view field);

std::string format_row(const Row& row);
std::string format_row(std::initializer_list<std::string_view> row);

/// Shortest round-trip decimal form of a double (locale independent).
std::string format_number(double value);

}  // namespace cordmorph::csv
