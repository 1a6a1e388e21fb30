#pragma once

#include <stdexcept>
#include <string>

namespace hca {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed argument: bad index, wrong shape, non-finite parameter.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A model failed validation at construction.
class InvalidModel : public Error {
 public:
  using Error::Error;
};

/// Exhaustive enumeration would exceed the configured trajectory cap.
class EnumerationCapExceeded : public Error {
 public:
  using Error::Error;
};

/// A hindsight probability was requested for a zero-probability (k, s, s').
class UnreachableConditioning : public Error {
 public:
  using Error::Error;
};

class SingularSystem : public Error {
 public:
  using Error::Error;
};

/// An analysis was requested whose mathematical precondition does not hold
/// (e.g. the value estimate is not the exact policy value).
class PreconditionUnmet : public Error {
 public:
  using Error::Error;
};

}  // namespace hca
