#ifndef PREMIA_ERRORS_HPP
#define PREMIA_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace premia {

/// Bad or inconsistent input: file problems, parse failures, misaligned
/// panels, invalid flags. CLI exit code 2.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numerical degeneracy in otherwise valid input: singular residual
/// covariance, rank-deficient regressors, unbounded CUE. CLI exit code 3.
class DegeneracyError : public std::runtime_error {
 public:
  explicit DegeneracyError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace premia

#endif
