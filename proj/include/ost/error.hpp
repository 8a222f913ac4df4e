#pragma once

#include <stdexcept>
#include <string>

namespace ost {

enum class Errc {
  empty_input,
  invalid_horizon,
  undefined_concordance,
  shape_error,
  unknown_level,
  parse_error,
  empty_node,
  config_error,
  schema_error,
  row_error,
  invalid_target,
  io_error,
  invariant_violation,
};

inline const char* errc_name(Errc code) {
  switch (code) {
    case Errc::empty_input: return "EmptyInput";
    case Errc::invalid_horizon: return "InvalidHorizon";
    case Errc::undefined_concordance: return "UndefinedConcordance";
    case Errc::shape_error: return "ShapeError";
    case Errc::unknown_level: return "UnknownLevel";
    case Errc::parse_error: return "ParseError";
    case Errc::empty_node: return "EmptyNode";
    case Errc::config_error: return "ConfigError";
    case Errc::schema_error: return "SchemaError";
    case Errc::row_error: return "RowError";
    case Errc::invalid_target: return "InvalidTarget";
    case Errc::io_error: return "IoError";
    case Errc::invariant_violation: return "InvariantViolation";
  }
  return "Error";
}

// Base of every error raised by the library. what() is prefixed with the
// error kind so CLI output names it.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

template <Errc Code>
class ErrorOf : public Error {
 public:
  explicit ErrorOf(const std::string& message) : Error(Code, message) {}
};

using EmptyInput = ErrorOf<Errc::empty_input>;
using InvalidHorizon = ErrorOf<Errc::invalid_horizon>;
using UndefinedConcordance = ErrorOf<Errc::undefined_concordance>;
using ShapeError = ErrorOf<Errc::shape_error>;
using UnknownLevel = ErrorOf<Errc::unknown_level>;
using ParseError = ErrorOf<Errc::parse_error>;
using EmptyNode = ErrorOf<Errc::empty_node>;
using ConfigError = ErrorOf<Errc::config_error>;
using SchemaError = ErrorOf<Errc::schema_error>;
using InvalidTarget = ErrorOf<Errc::invalid_target>;
using IoError = ErrorOf<Errc::io_error>;
using InvariantViolation = ErrorOf<Errc::invariant_violation>;

// Row-level data error; row is the 1-based data row (header excluded).
class RowError : public Error {
 public:
  RowError(std::size_t row, const std::string& message, const std::string& source = {})
      : Error(Errc::row_error, (source.empty() ? "" : source + ": ") + "row " + std::to_string(row) + ": " + message),
        row_(row),
        detail_(message) {}

  std::size_t row() const noexcept { return row_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::size_t row_;
  std::string detail_;
};

}  // namespace ost
