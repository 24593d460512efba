#pragma once

#include <stdexcept>
#include <string>

namespace cgym {

// Root of every error raised by the library. Subclasses map one-to-one onto
// the failure categories callers are expected to distinguish.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad parameter values (non-positive dt, gamma > 1, unknown config key, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Caller broke an API precondition (stepping an inactive aircraft, acting
// for an unknown id).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

// Unreadable or out-of-order external input (files, logs).
class InputError : public Error {
 public:
  using Error::Error;
};

// Malformed structured text; the message carries line/field context.
class ParseError : public InputError {
 public:
  using InputError::InputError;
};

// Structurally valid input that violates a cross-reference or invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class LaneExhaustionError : public Error {
 public:
  using Error::Error;
};

// A ratio whose denominator count is zero.
class UndefinedRatioError : public Error {
 public:
  using Error::Error;
};

// Checkpoint header, version or hash mismatch.
class LoadError : public Error {
 public:
  using Error::Error;
};

}  // namespace cgym
