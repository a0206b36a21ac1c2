#pragma once

#include <cstddef>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace resgrad {

/// Ordered record of named text fields. Iteration follows first-insertion
/// order; assigning to an existing key replaces its value in place.
class Context {
 public:
  using Entry = std::pair<std::string, std::string>;
  using const_iterator = std::vector<Entry>::const_iterator;

  Context() = default;
  Context(std::initializer_list<Entry> entries);

  void set(std::string key, std::string value);
  bool erase(std::string_view key);

  bool contains(std::string_view key) const noexcept { return find(key) != nullptr; }
  const std::string* find(std::string_view key) const noexcept;
  /// Throws MissingField when absent.
  const std::string& at(std::string_view key) const;

  std::vector<std::string> keys() const;
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  const_iterator begin() const noexcept { return entries_.begin(); }
  const_iterator end() const noexcept { return entries_.end(); }

  friend bool operator==(const Context&, const Context&) = default;

 private:
  std::vector<Entry> entries_;
};

/// h ⊕ Δ: key-wise update. Delta values overwrite colliding keys; every
/// other prior value is carried over untouched.
Context merge_outputs(const Context& context, const Context& delta);

/// The sub-record holding exactly `fields`, in the order given.
Context restrict_to(const Context& context, const std::vector<std::string>& fields);

}  // namespace resgrad
