#include "exprforge/error.hpp"

namespace exprforge {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::DuplicateTagName: return "DuplicateTagName";
    case ErrorCode::AliasCollision: return "AliasCollision";
    case ErrorCode::UnsupportedLanguage: return "UnsupportedLanguage";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptySelection: return "EmptySelection";
    case ErrorCode::ParamOutOfRange: return "ParamOutOfRange";
    case ErrorCode::InvalidImage: return "InvalidImage";
    case ErrorCode::BackendError: return "BackendError";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::EndpointUnavailable: return "EndpointUnavailable";
    case ErrorCode::MalformedResponse: return "MalformedResponse";
    case ErrorCode::DimensionMismatchFromBackend: return "DimensionMismatchFromBackend";
    case ErrorCode::NoValidTagInResponse: return "NoValidTagInResponse";
  }
  return "Unknown";
}

}  // namespace exprforge
