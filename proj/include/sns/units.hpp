#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

namespace sns {

// Fixed-point meters with at most 2 decimal places, e.g. "1.5" -> 150 cm.
// Returns nullopt on malformed input or more precision than centimeters.
std::optional<std::int64_t> parse_meters_to_cm(std::string_view text);

// "150" cm -> "1.5"
std::string format_cm_as_meters(std::int64_t cm);

} // namespace sns
