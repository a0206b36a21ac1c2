#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "resgrad/context.hpp"

namespace resgrad {

std::string_view trim(std::string_view s) noexcept;
std::string to_lower(std::string_view s);

/// Number of UTF-8 code points; invalid bytes count as one each.
std::size_t utf8_length(std::string_view s) noexcept;
/// The first `max_chars` code points of `s`.
std::string utf8_prefix(std::string_view s, std::size_t max_chars);

/// "rewritten_query" -> "Rewritten Query".
std::string field_label(std::string_view field);

/// `Label:\nvalue` blocks separated by a blank line, in context order.
std::string render_fields(const Context& fields);

}  // namespace resgrad
