#pragma once

#include <stdexcept>
#include <string>

namespace radscan {

// Base class for every error raised by the library. Callers that only need a
// diagnostic can catch this; the subclasses identify the failure category.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

class InsufficientData : public Error {
 public:
  using Error::Error;
};

// Scan configuration, log-ratio table and null calibration do not belong together.
class CalibrationMismatch : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace radscan
