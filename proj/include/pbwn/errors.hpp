#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pbwn {

/// Shape or size mismatch between operands. Messages name both shapes.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A weight row collapsed below the zero tolerance, so row normalization
/// (division by the row norm) is undefined. Carries the offending row index.
class DegenerateRowError : public std::runtime_error {
 public:
  DegenerateRowError(const std::string& msg, std::size_t row)
      : std::runtime_error(msg), row_(row) {}
  std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

/// Invalid configuration or API usage (bad optimizer settings, stale
/// backward cache, unmet structural preconditions).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed input file (bad magic, truncation, count mismatch, bad CSV).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numeric quantity left the domain where the requested diagnostic is
/// defined (singular Hessian, indeterminate gradient ratio).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pbwn
