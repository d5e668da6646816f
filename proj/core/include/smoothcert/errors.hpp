#pragma once

#include <stdexcept>
#include <string>

namespace smoothcert {

// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A caller-supplied value is outside its documented range.
struct ParameterError : Error {
  using Error::Error;
};

// Two arguments violate a relationship the API requires (e.g. length mismatch).
struct ContractError : Error {
  using Error::Error;
};

// An exhaustive computation would exceed the configured enumeration cap.
struct CapacityError : Error {
  using Error::Error;
};

// Weights / checkpoint file is corrupt, truncated, or from an unknown version.
struct PersistenceError : Error {
  using Error::Error;
};

// A dataset file violates its schema; message names the offending line.
struct IngestionError : Error {
  using Error::Error;
};

// The remote endpoint could not be reached or timed out. Retryable.
struct TransportError : Error {
  using Error::Error;
};

// The remote endpoint answered, but the body does not match the wire format.
// Never retried.
struct ProtocolError : Error {
  using Error::Error;
};

// The remote endpoint answered with a non-success HTTP status.
struct RemoteError : Error {
  RemoteError(const std::string& msg, int status_code)
      : Error(msg), status(status_code) {}
  int status;
};

// Bad command line: unknown flags, conflicting backend specs, missing files.
struct UsageError : Error {
  using Error::Error;
};

// Re-throws the in-flight exception with `context` prefixed to its message,
// preserving the concrete error type so retry/abort decisions stay correct.
[[noreturn]] void rethrow_with_context(const std::string& context);

}  // namespace smoothcert
