#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace resgrad {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MissingField : public Error {
 public:
  explicit MissingField(std::string field)
      : Error("missing field: " + field), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class CycleOrForwardReference : public Error {
 public:
  using Error::Error;
};

class OutputArityMismatch : public Error {
 public:
  using Error::Error;
};

class UnknownComponent : public Error {
 public:
  explicit UnknownComponent(const std::string& id) : Error("unknown component: " + id) {}
};

class UnknownTool : public Error {
 public:
  explicit UnknownTool(const std::string& id) : Error("no tool registered for component: " + id) {}
};

class NoOptimizableComponents : public Error {
 public:
  NoOptimizableComponents() : Error("no optimizable components to select from") {}
};

class EmptyBuffer : public Error {
 public:
  explicit EmptyBuffer(const std::string& id) : Error("feedback buffer is empty for component: " + id) {}
};

class TagsNotFound : public Error {
 public:
  TagsNotFound(const std::string& start_tag, const std::string& end_tag)
      : Error("completion does not contain " + start_tag + "..." + end_tag) {}
};

class DepthTooSmall : public Error {
 public:
  using Error::Error;
};

class NodeNotFound : public Error {
 public:
  explicit NodeNotFound(const std::string& id) : Error("node not found in trajectory: " + id) {}
};

class MisalignedRecords : public Error {
 public:
  using Error::Error;
};

/// Malformed structured input (JSON config, graph, dataset). Carries a
/// 1-based line number when one is known, 0 otherwise.
class ParseError : public Error {
 public:
  ParseError(std::string where, std::size_t line, const std::string& what)
      : Error(where + (line ? ":" + std::to_string(line) : std::string()) + ": " + what),
        where_(std::move(where)),
        line_(line) {}
  const std::string& where() const noexcept { return where_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string where_;
  std::size_t line_;
};

/// Semantic validation failure; lists every violation found, not only the first.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> violations)
      : Error(join(violations)), violations_(std::move(violations)) {}
  const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out = "validation failed";
    for (const auto& s : v) out += "\n  - " + s;
    return out;
  }
  std::vector<std::string> violations_;
};

}  // namespace resgrad
