#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace cwae {

/// Shortest decimal text that parses back to exactly the same double.
std::string format_double(double value);

/// Whole-string decimal parse; nullopt on any trailing garbage.
std::optional<double> parse_double(std::string_view text);

}  // namespace cwae
