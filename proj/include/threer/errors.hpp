#pragma once

#include <chrono>
#include <optional>
#include <stdexcept>
#include <string>

namespace threer {

/// Base class for everything thrown by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Bad input data or configuration: malformed files, violated preconditions,
/// out-of-range settings. Maps to CLI exit code 1.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A backend misbehaved or produced unusable output. Maps to CLI exit code 2.
class BackendError : public Error {
 public:
  using Error::Error;
};

class MalformedRecord : public ValidationError {
 public:
  MalformedRecord(std::size_t line_no, const std::string& reason)
      : ValidationError("malformed record at line " + std::to_string(line_no) + ": " + reason),
        line_no_(line_no),
        reason_(reason) {}

  std::size_t line_no() const { return line_no_; }
  const std::string& reason() const { return reason_; }

 private:
  std::size_t line_no_;
  std::string reason_;
};

class EmptyDatabase : public ValidationError {
 public:
  EmptyDatabase() : ValidationError("relation database contains zero valid entries") {}
};

class DimensionMismatch : public ValidationError {
 public:
  DimensionMismatch(std::size_t lhs, std::size_t rhs)
      : ValidationError("embedding dimension mismatch: " + std::to_string(lhs) + " vs " +
                        std::to_string(rhs)),
        lhs_(lhs),
        rhs_(rhs) {}

  std::size_t lhs() const { return lhs_; }
  std::size_t rhs() const { return rhs_; }

 private:
  std::size_t lhs_, rhs_;
};

class WrongEntryCount : public ValidationError {
 public:
  explicit WrongEntryCount(std::size_t found)
      : ValidationError("question bank must have 29 entries, found " + std::to_string(found)),
        found_(found) {}

  std::size_t found() const { return found_; }

 private:
  std::size_t found_;
};

class NonFiniteWeight : public ValidationError {
 public:
  explicit NonFiniteWeight(std::size_t index)
      : ValidationError("non-finite weight at question index " + std::to_string(index)),
        index_(index) {}

  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

class MixedBanks : public ValidationError {
 public:
  MixedBanks() : ValidationError("score reports come from different question banks") {}
};

class PlaceholderLeak : public ValidationError {
 public:
  explicit PlaceholderLeak(const std::string& detail)
      : ValidationError("question still contains the [prompt] placeholder: " + detail) {}
};

class PreconditionViolation : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class MissingArtifact : public ValidationError {
 public:
  explicit MissingArtifact(const std::string& detail)
      : ValidationError("recorded artifact is missing: " + detail) {}
};

enum class ErrorKind { kTransport, kRateLimited, kSchemaViolation, kContentPolicy, kTimeout };

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kTransport: return "Transport";
    case ErrorKind::kRateLimited: return "RateLimited";
    case ErrorKind::kSchemaViolation: return "SchemaViolation";
    case ErrorKind::kContentPolicy: return "ContentPolicy";
    case ErrorKind::kTimeout: return "Timeout";
  }
  return "Unknown";
}

/// Typed failure from a model backend. `attempt` is filled in by the retry
/// layer; `retry_after` is only meaningful for kRateLimited.
class ClientError : public BackendError {
 public:
  explicit ClientError(ErrorKind kind, const std::string& detail,
                       std::optional<std::chrono::milliseconds> retry_after = {})
      : BackendError(std::string(to_string(kind)) + ": " + detail),
        kind_(kind),
        detail_(detail),
        retry_after_(retry_after) {}

  ErrorKind kind() const { return kind_; }
  const std::string& detail() const { return detail_; }
  int attempt() const { return attempt_; }
  std::optional<std::chrono::milliseconds> retry_after() const { return retry_after_; }

  ClientError with_attempt(int attempt) const {
    ClientError copy = *this;
    copy.attempt_ = attempt;
    return copy;
  }

  ClientError with_context(const std::string& prefix) const {
    ClientError amended(kind_, prefix + ": " + detail_, retry_after_);
    amended.attempt_ = attempt_;
    return amended;
  }

 private:
  ErrorKind kind_;
  std::string detail_;
  int attempt_ = 0;
  std::optional<std::chrono::milliseconds> retry_after_;
};

/// A backend satisfied the transport but broke its output contract
/// (e.g. wrong frame count from the enhancer).
class ContractViolation : public BackendError {
 public:
  using BackendError::BackendError;
};

class DescriptionCollapse : public BackendError {
 public:
  explicit DescriptionCollapse(std::size_t step_index)
      : BackendError("merge step " + std::to_string(step_index) + " returned an empty description"),
        step_index_(step_index) {}

  std::size_t step_index() const { return step_index_; }

 private:
  std::size_t step_index_;
};

class UnparseableCandidates : public BackendError {
 public:
  explicit UnparseableCandidates(const std::string& excerpt)
      : BackendError("could not parse candidate list from completion: " + excerpt) {}
};

class RefinementFailure : public BackendError {
 public:
  explicit RefinementFailure(const std::string& detail)
      : BackendError("refinement produced no parseable candidates: " + detail) {}
};

class CritiqueSchemaError : public BackendError {
 public:
  explicit CritiqueSchemaError(const std::string& detail)
      : BackendError("critique output violates the schema: " + detail) {}
};

}  // namespace threer
