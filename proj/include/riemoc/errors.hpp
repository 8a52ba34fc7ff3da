#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace riemoc {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Syntax error in an expression string; `offset` is the byte position.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " (at offset " + std::to_string(offset) + ")"), offset(offset) {}
  std::size_t offset;
};

/// Domain error during expression evaluation (ln of non-positive, division
/// by zero, unbound variable, non-finite result).
class EvalError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure in an integrator or solver (blow-up, non-convergence).
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Invalid scenario file or inconsistent problem data.
class ScenarioError : public Error {
 public:
  using Error::Error;
};

}  // namespace riemoc
