#pragma once

#include <string>
#include <vector>

namespace qmc::detail {

// RFC-4180-style CSV: quoted fields may contain commas, doubled quotes and
// newlines. Accepts LF and CRLF line ends. A trailing newline does not
// produce an empty record.
std::vector<std::vector<std::string>> parse_csv(const std::string& text);

// Quotes the field only when it contains a comma, quote or newline.
std::string csv_escape(const std::string& field);

// Locale-independent strict parsers; return false on any trailing garbage.
bool parse_real(const std::string& text, double& out);
bool parse_int(const std::string& text, long long& out);

} // namespace qmc::detail
