#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace blocksync {

/// Shortest decimal string that parses back to exactly `v`. Locale independent.
std::string format_double(double v);

/// Fixed-point with `decimals` digits after the point. Locale independent.
std::string format_fixed(double v, int decimals);

/// Parses the whole of `s` as a double; nullopt on any trailing junk.
std::optional<double> parse_double(std::string_view s);
std::optional<unsigned long long> parse_uint(std::string_view s);

std::string_view trim(std::string_view s);

}  // namespace blocksync
