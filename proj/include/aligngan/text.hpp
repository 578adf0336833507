#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

// Small parsing helpers shared by the spec, config and checkpoint code.
namespace aligngan::text {

std::string_view trim(std::string_view s);
std::vector<std::string_view> split(std::string_view s, char sep);

/// Throws ConfigError naming `what` on anything but a plain decimal integer.
std::size_t parse_size(std::string_view s, std::string_view what);
std::uint64_t parse_u64(std::string_view s, std::string_view what);
double parse_double(std::string_view s, std::string_view what);
/// Shortest text that parses back to the same double.
std::string format_double(double v);
bool parse_bool(std::string_view s, std::string_view what);

/// key=value lines; blank lines and '#' comments skipped. Duplicate keys and
/// lines without '=' throw ConfigError. Order is preserved.
std::vector<std::pair<std::string, std::string>> parse_key_values(std::string_view body);

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace aligngan::text
