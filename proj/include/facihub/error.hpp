#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace facihub {

/// Machine-readable error category. The string form is what the CLI and the
/// HTTP layer report, so keep the names stable.
enum class ErrorCode {
  argument,
  not_found,
  integrity,
  conflict,
  validation,
  degenerate,
  sample_size,
  analysis,
  io,
  generation,
  unparseable_output,
  role_violation,
  config,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::argument: return "argument";
    case ErrorCode::not_found: return "not_found";
    case ErrorCode::integrity: return "integrity";
    case ErrorCode::conflict: return "conflict";
    case ErrorCode::validation: return "validation";
    case ErrorCode::degenerate: return "degenerate";
    case ErrorCode::sample_size: return "sample_size";
    case ErrorCode::analysis: return "analysis";
    case ErrorCode::io: return "io";
    case ErrorCode::generation: return "generation";
    case ErrorCode::unparseable_output: return "unparseable_output";
    case ErrorCode::role_violation: return "role_violation";
    case ErrorCode::config: return "config";
  }
  return "unknown";
}

struct FieldError {
  std::string field;
  std::string message;
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Validation failure carrying per-field detail (used for 422 bodies).
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& message, std::vector<FieldError> fields = {})
      : Error(ErrorCode::validation, message), fields_(std::move(fields)) {}

  const std::vector<FieldError>& fields() const noexcept { return fields_; }

 private:
  std::vector<FieldError> fields_;
};

/// Text-generation failure. Transport failures are retryable by the caller.
class GenerationError : public Error {
 public:
  GenerationError(const std::string& message, bool retryable)
      : Error(ErrorCode::generation, message), retryable_(retryable) {}

  bool retryable() const noexcept { return retryable_; }

 private:
  bool retryable_;
};

/// Model output that could not be parsed after the retry budget; the last raw
/// output is kept for the audit trail.
class UnparseableOutputError : public Error {
 public:
  UnparseableOutputError(const std::string& message, std::string raw_output)
      : Error(ErrorCode::unparseable_output, message), raw_output_(std::move(raw_output)) {}

  const std::string& raw_output() const noexcept { return raw_output_; }

 private:
  std::string raw_output_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace facihub
