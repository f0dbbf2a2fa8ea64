#pragma once

#include <stdexcept>
#include <string>

namespace mcef {

/// Invalid user-facing input: design parameters, config files, CLI arguments.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

/// Numerical failure: root brackets without a sign change, non-convergent
/// iterations, quadrature that cannot reach the requested tolerance.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// Filesystem failure while reading configs or writing outputs.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace mcef
