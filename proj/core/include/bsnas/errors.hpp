#pragma once

#include <stdexcept>
#include <string>

namespace bsnas {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed configuration, space definition, or architecture text.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An architecture that does not belong to the space it is used with.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Empty feasible region: no layer option, no channel, or no candidate
/// inside the FLOPs window.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// A caller broke a documented precondition (e.g. passing an unsorted batch).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// Exhaustive enumeration refused because the space exceeds the given limit.
class SpaceTooLargeError : public Error {
 public:
  using Error::Error;
};

/// Raised by evaluator backends; aborts shrinking or evolution.
class EvaluatorError : public Error {
 public:
  using Error::Error;
};

/// Table lookup failed under the `error` missing-key policy.
class MissingArchitectureError : public EvaluatorError {
 public:
  using EvaluatorError::EvaluatorError;
};

}  // namespace bsnas
