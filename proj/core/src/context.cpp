#include "resgrad/context.hpp"

#include <algorithm>

#include "resgrad/errors.hpp"

namespace resgrad {

Context::Context(std::initializer_list<Entry> entries) {
  for (const auto& [k, v] : entries) set(k, v);
}

void Context::set(std::string key, std::string value) {
  auto it = std::find_if(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.first == key; });
  if (it != entries_.end()) {
    it->second = std::move(value);
    return;
  }
  entries_.emplace_back(std::move(key), std::move(value));
}

bool Context::erase(std::string_view key) {
  auto it = std::find_if(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.first == key; });
  if (it == entries_.end()) return false;
  entries_.erase(it);
  return true;
}

const std::string* Context::find(std::string_view key) const noexcept {
  for (const auto& e : entries_)
    if (e.first == key) return &e.second;
  return nullptr;
}

const std::string& Context::at(std::string_view key) const {
  if (const auto* v = find(key)) return *v;
  throw MissingField(std::string(key));
}

std::vector<std::string> Context::keys() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.first);
  return out;
}

Context merge_outputs(const Context& context, const Context& delta) {
  Context out = context;
  for (const auto& [k, v] : delta) out.set(k, v);
  return out;
}

Context restrict_to(const Context& context, const std::vector<std::string>& fields) {
  Context out;
  for (const auto& f : fields) out.set(f, context.at(f));
  return out;
}

}  // namespace resgrad
