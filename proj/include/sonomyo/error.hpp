#pragma once

#include <stdexcept>
#include <string>

namespace sonomyo {

// Base for every error raised by the library. Callers that only need to
// report a failure can catch this; the subclasses exist so that pipeline
// stages can apply a specific fallback policy.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidFrameError : public Error {
 public:
  using Error::Error;
};

// Both images have zero variance, correlation undefined.
class DegenerateCorrelationError : public Error {
 public:
  using Error::Error;
};

// Frame equals both references, so (1-Cm)+(1-Cr) == 0.
class DegenerateSignalError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

class IndistinguishableReferencesError : public Error {
 public:
  using Error::Error;
};

// Out-of-order samples or similar misuse of a state machine.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

class DegenerateRegressionError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class IncompatibleVersionError : public IoError {
 public:
  using IoError::IoError;
};

}  // namespace sonomyo
