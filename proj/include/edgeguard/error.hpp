#pragma once

#include <stdexcept>
#include <string>

namespace edgeguard {

// Root of every error raised by the library. The CLI maps subclasses to exit
// codes, so new error kinds should derive from one of the groups below.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes that do not line up (matmul inner dims, feature width vs model input).
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Out-of-range hyperparameter or argument (dropout rate >= 1, window 0, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Operation called in the wrong order, e.g. backward before forward.
class StateError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf in a loss, gradient or parameter buffer.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Malformed CSV, schema or missing label column. Carries row context in the
// message.
class IngestionError : public Error {
 public:
  using Error::Error;
};

// Binary container problems: bad magic, version mismatch, truncation, checksum.
class FormatError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Federated aggregation received incongruent updates.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

// Threshold profile cannot be met on the given scores.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

}  // namespace edgeguard
