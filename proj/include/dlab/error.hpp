#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace dlab {

/// Base class for every error raised by the library. The module name is kept
/// separately so the CLI can report where a failure originated.
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& message)
      : std::runtime_error(module + ": " + message), module_(std::move(module)) {}

  const std::string& module() const noexcept { return module_; }

 private:
  std::string module_;
};

/// Malformed input text. `line` is 1-based; 0 when not line oriented.
class ParseError : public Error {
 public:
  ParseError(std::string module, std::size_t line, const std::string& message)
      : Error(std::move(module), (line ? "line " + std::to_string(line) + ": " : std::string()) + message),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A value violates a documented invariant of a domain type.
class ValidationError : public Error {
 public:
  ValidationError(std::string module, std::string subject, std::string field, const std::string& message)
      : Error(std::move(module), subject + " [" + field + "]: " + message),
        subject_(std::move(subject)),
        field_(std::move(field)) {}

  const std::string& subject() const noexcept { return subject_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::string subject_;
  std::string field_;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A metric that is not defined for the given input (e.g. Kendall's tau with n < 2).
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

/// State space or table larger than the dense-enumeration cap.
class ResourceError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(std::string module, const std::string& message, double last_gap)
      : Error(std::move(module), message), last_gap_(last_gap) {}

  double last_gap() const noexcept { return last_gap_; }

 private:
  double last_gap_;
};

/// Configuration outside the region where a bound applies (alpha >= 1, missing alpha).
class UnsupportedConfigError : public Error {
 public:
  using Error::Error;
};

class NoSolutionError : public Error {
 public:
  using Error::Error;
};

class GenerationError : public Error {
 public:
  GenerationError(std::string module, const std::string& message, std::size_t attempts)
      : Error(std::move(module), message), attempts_(attempts) {}

  std::size_t attempts() const noexcept { return attempts_; }

 private:
  std::size_t attempts_;
};

}  // namespace dlab
