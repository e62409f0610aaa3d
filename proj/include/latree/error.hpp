#pragma once

#include <stdexcept>
#include <string>

namespace latree {

/// Base class for every error thrown by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Caller-side problems: malformed files, bad dimensions, indices out of
/// range, preconditions on the forest state. CLI maps these to exit code 2.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Data-side problems: the numbers themselves make the requested operation
/// impossible (degenerate columns, singular systems, unrealizable stars).
/// CLI maps these to exit code 3.
class NumericError : public Error {
 public:
  using Error::Error;
};

// --- input errors ---

class ShapeError : public InputError {
 public:
  using InputError::InputError;
};

class ParseError : public InputError {
 public:
  using InputError::InputError;
};

class AsymmetricMatrixError : public InputError {
 public:
  using InputError::InputError;
};

class OutOfRangeError : public InputError {
 public:
  using InputError::InputError;
};

class TooSmallError : public InputError {
 public:
  using InputError::InputError;
};

class TooLargeError : public InputError {
 public:
  using InputError::InputError;
};

class IndexError : public InputError {
 public:
  using InputError::InputError;
};

class NotIndependentError : public InputError {
 public:
  using InputError::InputError;
};

class UnknownTreeError : public InputError {
 public:
  using InputError::InputError;
};

class SameTreeError : public InputError {
 public:
  using InputError::InputError;
};

class TreeTooSmallError : public InputError {
 public:
  using InputError::InputError;
};

class TreeNotSimplifiedError : public InputError {
 public:
  using InputError::InputError;
};

class EmptyCandidateListError : public InputError {
 public:
  using InputError::InputError;
};

// --- numeric errors ---

class DegenerateVariableError : public NumericError {
 public:
  using NumericError::NumericError;
};

class NotStarRealizableError : public NumericError {
 public:
  using NumericError::NumericError;
};

class CorrelationTooSmallError : public NumericError {
 public:
  using NumericError::NumericError;
};

class SingularSystemError : public NumericError {
 public:
  using NumericError::NumericError;
};

class FitNotConvergedError : public NumericError {
 public:
  using NumericError::NumericError;
};

class StuckStateError : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace latree
