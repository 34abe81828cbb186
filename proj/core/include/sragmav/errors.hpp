#pragma once

#include <stdexcept>
#include <string>

namespace sragmav {

/// Base class for every failure the library raises on purpose.
/// `kind()` is a stable machine-readable tag used in CLI error JSON.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

/// An annotation string that does not parse under the configured format.
class MalformedAnnotation : public Error {
 public:
  explicit MalformedAnnotation(const std::string& message)
      : Error("malformed_annotation", message) {}
};

/// A quadruplet whose hatefulness label contradicts its targeted group.
class RuleViolation : public Error {
 public:
  explicit RuleViolation(const std::string& message)
      : Error("rule_violation", message) {}
};

/// A dataset row that breaks the schema (missing field, empty content, ...).
class InvalidRecord : public Error {
 public:
  explicit InvalidRecord(const std::string& message)
      : Error("invalid_record", message) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message)
      : Error("config_error", message) {}
};

/// File cannot be opened, read, or has a corrupt on-disk layout.
class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error("io_error", message) {}
};

class DuplicateId : public Error {
 public:
  explicit DuplicateId(const std::string& message)
      : Error("duplicate_id", message) {}
};

class DimMismatch : public Error {
 public:
  explicit DimMismatch(const std::string& message)
      : Error("dim_mismatch", message) {}
};

class ZeroVector : public Error {
 public:
  explicit ZeroVector(const std::string& message)
      : Error("zero_vector", message) {}
};

class MissingVector : public Error {
 public:
  explicit MissingVector(const std::string& message)
      : Error("missing_vector", message) {}
};

class EmptyIndex : public Error {
 public:
  explicit EmptyIndex(const std::string& message)
      : Error("empty_index", message) {}
};

/// Transport-level failure: connection refused, DNS, malformed wire bytes.
class BackendUnavailable : public Error {
 public:
  explicit BackendUnavailable(const std::string& message)
      : Error("backend_unavailable", message) {}
};

/// The backend answered, but not with the shape the protocol promises.
class BackendShapeError : public Error {
 public:
  explicit BackendShapeError(const std::string& message)
      : Error("backend_shape_error", message) {}
};

class HttpError : public Error {
 public:
  HttpError(int status, const std::string& message)
      : Error("http_error", message), status_(status) {}

  int status() const noexcept { return status_; }

 private:
  int status_;
};

class Timeout : public Error {
 public:
  explicit Timeout(const std::string& message) : Error("timeout", message) {}
};

/// Voting finished without a single parseable answer to promote.
class NoValidWinner : public Error {
 public:
  explicit NoValidWinner(const std::string& message)
      : Error("no_valid_winner", message) {}
};

/// Prediction ids are not a subset of gold ids (or ids repeat).
class IdMismatch : public Error {
 public:
  explicit IdMismatch(const std::string& message)
      : Error("id_mismatch", message) {}
};

/// A sweep asked for a threshold above the one the votes were recorded with.
class TauExceedsRecorded : public Error {
 public:
  explicit TauExceedsRecorded(const std::string& message)
      : Error("tau_exceeds_recorded", message) {}
};

}  // namespace sragmav
