#pragma once

#include <stdexcept>
#include <string>

namespace codec {

// Base for every error the toolkit raises on purpose. The CLI maps the
// concrete subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid parameters or configuration (exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Transport failures and malformed provider responses (exit code 3).
class ProviderError : public Error {
 public:
  using Error::Error;
};

class TransportError : public ProviderError {
 public:
  TransportError(const std::string& what, int status = 0)
      : ProviderError(what), status_(status) {}
  // HTTP status, or 0 when the request never produced a response.
  int status() const noexcept { return status_; }

 private:
  int status_;
};

// The provider answered, but the answer violates the scoring contract.
class ProtocolError : public ProviderError {
 public:
  using ProviderError::ProviderError;
};

// Unreadable or malformed input data (exit code 4).
class DataError : public Error {
 public:
  using Error::Error;
};

// A single sample cannot be scored (too few target tokens after the skip).
// Callers record it and move on; it never aborts a run.
class UnscorableSample : public Error {
 public:
  using Error::Error;
};

}  // namespace codec
