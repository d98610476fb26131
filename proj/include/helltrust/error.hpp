#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace helltrust {

/// Base of every exception thrown by the library. The CLI maps the concrete
/// type to a process exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or out-of-range input data. `line()` is 1-based, 0 when the
/// failure is not tied to a line (missing file, empty input).
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Argument outside the domain of a numerical routine.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Threshold estimation cannot proceed: zero-variance distance sample, too
/// few usable users, or a target density outside (0, 1).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

/// SGD produced a non-finite loss or parameter.
class DivergenceError : public Error {
 public:
  explicit DivergenceError(int epoch)
      : Error("training diverged at epoch " + std::to_string(epoch)), epoch_(epoch) {}
  DivergenceError(int epoch, const std::string& context)
      : Error(context + ": training diverged at epoch " + std::to_string(epoch)), epoch_(epoch) {}

  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

}  // namespace helltrust
