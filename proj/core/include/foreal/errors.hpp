#pragma once

#include <stdexcept>
#include <string>

namespace foreal {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad user-supplied configuration (flags, knobs, spec files).
struct ConfigError : Error {
  using Error::Error;
};

// A caller broke a documented precondition.
struct ContractError : Error {
  using Error::Error;
};

// Input data failed validation (datasets, traces, specs).
struct ValidationError : Error {
  using Error::Error;
};

// Malformed response from a remote model server.
struct ProtocolError : Error {
  using Error::Error;
};

// Model backend failure. Retryable means a transport-level fault that a
// fresh attempt may clear; non-retryable faults abort the session.
struct ProviderError : Error {
  ProviderError(const std::string& what, bool retryable)
      : Error(what), retryable(retryable) {}
  bool retryable;
};

struct OverflowError : Error {
  using Error::Error;
};

}  // namespace foreal
