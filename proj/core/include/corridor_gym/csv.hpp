#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace cgym::csv {

// Shortest representation that parses back to the identical double.
std::string format_double(double v);

// Comma-separated fields with surrounding whitespace trimmed. No quoting:
// none of the library's files carry commas inside fields.
std::vector<std::string_view> split(std::string_view line);

// Both throw InputError with `context` prefixed.
double parse_double(std::string_view field, const std::string& context);
std::int64_t parse_int(std::string_view field, const std::string& context);

}  // namespace cgym::csv
