#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace algorec::text {

/// Shortest decimal form that round-trips to the same double ("0.1", "10", "1e-05").
std::string format_double(double value);

/// Parses the whole of `s` as a finite double; nullopt on trailing junk, empty input or non-finite.
std::optional<double> parse_double(std::string_view s);

std::vector<std::string> split(std::string_view line, char delimiter);

std::string_view trim(std::string_view s);

}  // namespace algorec::text
