#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace genattr {

// Precondition on an argument was violated (length mismatch, unknown id, ...).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A backend was asked for an operation it does not advertise.
class CapabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Any failure raised by a model backend.
class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Decoding did not terminate within the configured answer-length bound.
class GenerationOverflow : public BackendError {
 public:
  using BackendError::BackendError;
};

// Encoding session used after its backend invalidated it, or by a foreign backend.
class StaleSession : public BackendError {
 public:
  using BackendError::BackendError;
};

// Remote transport failure: timeout, HTTP error status, malformed payload.
class TransportError : public BackendError {
 public:
  enum class Kind { timeout, connection, http_status, malformed };

  TransportError(Kind kind, int status, std::size_t attempts, const std::string& what)
      : BackendError(what), kind_(kind), status_(status), attempts_(attempts) {}

  Kind kind() const noexcept { return kind_; }
  int status() const noexcept { return status_; }
  std::size_t attempts() const noexcept { return attempts_; }

 private:
  Kind kind_;
  int status_;
  std::size_t attempts_;
};

// A sampling path failed; carries the index of the path that raised.
class PathFailure : public std::runtime_error {
 public:
  PathFailure(std::size_t path_index, const std::string& what)
      : std::runtime_error("path " + std::to_string(path_index) + ": " + what),
        path_index_(path_index) {}

  std::size_t path_index() const noexcept { return path_index_; }

 private:
  std::size_t path_index_;
};

// Dataset line failed schema validation.
class SchemaError : public std::runtime_error {
 public:
  SchemaError(std::size_t line, std::string field, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what),
        line_(line),
        field_(std::move(field)) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

}  // namespace genattr
