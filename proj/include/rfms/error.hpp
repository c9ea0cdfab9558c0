#pragma once

#include <stdexcept>
#include <string>

namespace rfms {

/// Precondition on caller-supplied data or arguments was violated.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A serialized model could not be decoded.
class DecodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Gaussian-process fit failed even after nugget escalation.
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A curator rejected a request (malformed model, missing field, ...).
class ProtocolError : public std::runtime_error {
 public:
  ProtocolError(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

/// Network-level failure talking to a remote curator. Safe to retry.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An operation was invoked for a method kind that does not support it.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace rfms
