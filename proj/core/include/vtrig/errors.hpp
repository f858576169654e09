#pragma once

#include <stdexcept>
#include <string>

namespace vtrig {

// Base of all toolkit errors. The CLI maps subclasses to exit codes:
// ConfigError -> 2, DataError -> 3, NoPeriodicityError/NoCpsFoundError -> 4,
// anything else -> 1.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration or parameters supplied by the user.
class ConfigError : public Error {
public:
  using Error::Error;
};

// Bad payload: NaN/Inf samples, empty traces, malformed sidecars.
class DataError : public Error {
public:
  using Error::Error;
};

// Structurally broken file (truncated, wrong size).
class FormatError : public DataError {
public:
  using DataError::DataError;
};

// API contract violation (mismatched lengths, empty inputs).
class ContractError : public Error {
public:
  using Error::Error;
};

// Requested cut exceeds the source trace.
class BoundsError : public Error {
public:
  using Error::Error;
};

// Auto-correlation found fewer than two prominent peaks.
class NoPeriodicityError : public Error {
public:
  using Error::Error;
};

// The delta sweep produced a flat distance curve.
class DeltaNotIdentifiableError : public Error {
public:
  using Error::Error;
};

// Template matching found no occurrence above the threshold.
class NoCpsFoundError : public Error {
public:
  NoCpsFoundError(const std::string& msg, double max_score)
      : Error(msg), max_observed_score(max_score) {}
  double max_observed_score;
};

// Profiling set cannot separate classes (e.g. a single label everywhere).
class DegenerateProfileError : public Error {
public:
  using Error::Error;
};

}  // namespace vtrig
