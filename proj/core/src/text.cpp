#include "resgrad/text.hpp"

#include <cctype>

namespace resgrad {

std::string_view trim(std::string_view s) noexcept {
  auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

namespace {

// Byte length of the code point starting at s[i]; falls back to 1 on
// malformed sequences so every byte is consumed exactly once.
std::size_t code_point_width(std::string_view s, std::size_t i) noexcept {
  const auto lead = static_cast<unsigned char>(s[i]);
  std::size_t width = 1;
  if (lead >= 0xF0 && lead <= 0xF4) width = 4;
  else if (lead >= 0xE0) width = 3;
  else if (lead >= 0xC2 && lead <= 0xDF) width = 2;
  if (width == 1 || i + width > s.size()) return 1;
  for (std::size_t k = 1; k < width; ++k)
    if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) return 1;
  return width;
}

}  // namespace

std::size_t utf8_length(std::string_view s) noexcept {
  std::size_t n = 0;
  for (std::size_t i = 0; i < s.size(); i += code_point_width(s, i)) ++n;
  return n;
}

std::string utf8_prefix(std::string_view s, std::size_t max_chars) {
  std::size_t i = 0;
  for (std::size_t n = 0; n < max_chars && i < s.size(); ++n) i += code_point_width(s, i);
  return std::string(s.substr(0, i));
}

std::string field_label(std::string_view field) {
  std::string out;
  out.reserve(field.size());
  bool start = true;
  for (char c : field) {
    if (c == '_') {
      out.push_back(' ');
      start = true;
      continue;
    }
    out.push_back(start ? static_cast<char>(std::toupper(static_cast<unsigned char>(c))) : c);
    start = false;
  }
  return out;
}

std::string render_fields(const Context& fields) {
  std::string out;
  for (const auto& [k, v] : fields) {
    if (!out.empty()) out += "\n\n";
    out += field_label(k);
    out += ":\n";
    out += v;
  }
  return out;
}

}  // namespace resgrad
