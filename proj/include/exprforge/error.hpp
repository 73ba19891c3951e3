#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace exprforge {

enum class ErrorCode {
  MissingFile,
  SchemaViolation,
  DuplicateTagName,
  AliasCollision,
  UnsupportedLanguage,
  DimensionMismatch,
  EmptySelection,
  ParamOutOfRange,
  InvalidImage,
  BackendError,
  Timeout,
  EndpointUnavailable,
  MalformedResponse,
  DimensionMismatchFromBackend,
  NoValidTagInResponse,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the library. `subject` names the offending
// field, record, alias or parameter when there is one.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message, std::string subject = {})
      : std::runtime_error(std::move(message)), code_(code), subject_(std::move(subject)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& subject() const noexcept { return subject_; }

 private:
  ErrorCode code_;
  std::string subject_;
};

}  // namespace exprforge
