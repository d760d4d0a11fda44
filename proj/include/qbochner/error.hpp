#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace qbochner {

using Complex = std::complex<double>;

enum class ErrorKind {
  domain,
  range,
  configuration,
  unsupported_order,
  unsupported_state,
  numerical_inconsistency,
  pole,
  insufficient_data,
  data_quality,
  parse,
  io,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::domain: return "domain";
    case ErrorKind::range: return "range";
    case ErrorKind::configuration: return "configuration";
    case ErrorKind::unsupported_order: return "unsupported-order";
    case ErrorKind::unsupported_state: return "unsupported-state";
    case ErrorKind::numerical_inconsistency: return "numerical-inconsistency";
    case ErrorKind::pole: return "pole";
    case ErrorKind::insufficient_data: return "insufficient-data";
    case ErrorKind::data_quality: return "data-quality";
    case ErrorKind::parse: return "parse";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

/// Base of every error raised by the library. The kind selects the CLI exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// A value whose magnitude is not representable. Carries ln|value|.
class RangeError : public Error {
 public:
  RangeError(const std::string& what, double log_magnitude)
      : Error(ErrorKind::range, what), log_magnitude_(log_magnitude) {}

  double log_magnitude() const noexcept { return log_magnitude_; }

 private:
  double log_magnitude_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(ErrorKind::parse, "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Process exit code for an error kind: 2 usage, 3 I/O, 4 data quality, 5 numerics.
inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::io:
    case ErrorKind::parse:
      return 3;
    case ErrorKind::data_quality:
    case ErrorKind::insufficient_data:
      return 4;
    case ErrorKind::numerical_inconsistency:
    case ErrorKind::range:
    case ErrorKind::pole:
      return 5;
    case ErrorKind::domain:
    case ErrorKind::configuration:
    case ErrorKind::unsupported_order:
    case ErrorKind::unsupported_state:
      return 2;
  }
  return 1;
}

}  // namespace qbochner
