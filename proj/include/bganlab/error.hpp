#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace bganlab {

/// Base of every domain error raised by the library. The CLI maps these to
/// exit code 1.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual const char* kind() const noexcept { return "error"; }
};

/// A parameter outside its documented domain (dt <= 0, negative rate, ...).
class ParamError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "param_error"; }
};

/// Structural validation failure; carries every violation found.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> violations)
      : Error(join(violations)), violations_(std::move(violations)) {}
  const std::vector<std::string>& violations() const noexcept { return violations_; }
  const char* kind() const noexcept override { return "validation_error"; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out = "validation failed:";
    for (const auto& s : v) out += "\n  - " + s;
    return out;
  }
  std::vector<std::string> violations_;
};

/// Text that could not be parsed. Line and column are 1-based; 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& msg, int line, int column)
      : Error(format(msg, line, column)), line_(line), column_(column) {}
  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }
  const char* kind() const noexcept override { return "parse_error"; }

 private:
  static std::string format(const std::string& msg, int line, int column) {
    if (line <= 0) return msg;
    return "line " + std::to_string(line) + ", col " + std::to_string(column) + ": " + msg;
  }
  int line_;
  int column_;
};

/// A structured document (CGX, checkpoint, network JSON) violates its schema.
class SchemaError : public Error {
 public:
  SchemaError(const std::string& path, const std::string& msg)
      : Error(path + ": " + msg), path_(path) {}
  const std::string& path() const noexcept { return path_; }
  const char* kind() const noexcept override { return "schema_error"; }

 private:
  std::string path_;
};

class IoError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "io_error"; }
};

}  // namespace bganlab
