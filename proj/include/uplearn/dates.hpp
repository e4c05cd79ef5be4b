#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace uplearn {

/// Days since 1970-01-01 for a strict ISO-8601 calendar date ("YYYY-MM-DD"),
/// or nullopt when the text is not a valid date.
std::optional<int> parse_date_days(std::string_view iso);

/// Inverse of parse_date_days.
std::string format_date(int days);

}  // namespace uplearn
