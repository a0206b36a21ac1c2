#include "resgrad/prompts.hpp"

#include "resgrad/errors.hpp"

namespace resgrad {

std::string format_template(std::string_view tmpl, const std::map<std::string, std::string, std::less<>>& values) {
  std::string out;
  out.reserve(tmpl.size());
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    const char c = tmpl[i];
    if (c == '{') {
      if (i + 1 < tmpl.size() && tmpl[i + 1] == '{') {
        out.push_back('{');
        ++i;
        continue;
      }
      const auto close = tmpl.find('}', i);
      if (close == std::string_view::npos) throw Error("unterminated placeholder in template");
      const auto name = tmpl.substr(i + 1, close - i - 1);
      auto it = values.find(name);
      if (it == values.end()) throw Error("no value for placeholder {" + std::string(name) + "}");
      out += it->second;
      i = close;
    } else if (c == '}') {
      if (i + 1 < tmpl.size() && tmpl[i + 1] == '}') ++i;
      out.push_back('}');
    } else {
      out.push_back(c);
    }
  }
  return out;
}

}  // namespace resgrad
