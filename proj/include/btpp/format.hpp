#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace btpp {

/// Shortest round-trip decimal form, independent of the global locale.
std::string format_double(double v);

std::optional<double> parse_double(std::string_view s);
std::optional<long long> parse_integer(std::string_view s);

std::string_view trim(std::string_view s);

}  // namespace btpp
