#pragma once

#include <stdexcept>
#include <string>

namespace rpn2t {

// Base of every error thrown by the library. The CLI maps the concrete
// subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed arguments, configs or specs supplied by the caller.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Missing/corrupt files, inconsistent sequences, infeasible geometry.
class DataError : public Error {
 public:
  using Error::Error;
};

// Non-finite losses or parameter updates.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace rpn2t
