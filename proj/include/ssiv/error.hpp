#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ssiv {

/// Bad input: malformed files, schema violations, inconsistent specs.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parse failure tied to a location in an input file.
class ParseError : public ValidationError {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : ValidationError(file + ":" + std::to_string(line) + ": " + what), file_(file), line_(line) {}

  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

/// Numerical failure of an estimator: rank deficiency, failed identification,
/// non-convergence.
class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ssiv
