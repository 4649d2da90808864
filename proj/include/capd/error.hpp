#pragma once

#include <stdexcept>
#include <string>

namespace capd {

// Input or invariant violation: bad shapes, unknown ids, inconsistent tables.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed file content. Carries the 1-based physical line number when known.
class FormatError : public ValidationError {
 public:
  FormatError(const std::string& what, std::size_t line)
      : ValidationError(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  explicit FormatError(const std::string& what) : ValidationError(what), line_(0) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Numerical breakdown: singular systems, non-finite results.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace capd
