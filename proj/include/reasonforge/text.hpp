#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace reasonforge::text {

/// Lowercased ASCII alphanumeric runs.
std::vector<std::string> tokens(std::string_view s);

std::string lower(std::string_view s);
std::string trim(std::string_view s);
bool starts_with(std::string_view s, std::string_view prefix);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// True when the label's tokens occur consecutively in `phrase_tokens`; the
/// final label token may carry a plural "s"/"es" suffix.
bool label_in(std::string_view label, const std::vector<std::string>& phrase_tokens);

/// Naive English plural that keeps the singular as a prefix ("bus" -> "buses").
std::string plural(std::string_view noun);

}  // namespace reasonforge::text
