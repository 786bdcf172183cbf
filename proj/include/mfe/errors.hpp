#pragma once

#include <stdexcept>
#include <string>

namespace mfe {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Requested bandlimit cannot be represented on the grid.
class ResolutionError : public Error {
 public:
  using Error::Error;
};

/// Argument fails a documented precondition (non-orthogonal matrix, bad axis, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Field magnitude would overflow exp().
class MagnitudeError : public Error {
 public:
  using Error::Error;
};

/// Malformed or corrupted serialized data.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Stereographic projection of the projection pole itself.
class PoleError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

}  // namespace mfe
