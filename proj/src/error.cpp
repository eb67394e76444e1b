#include "mwepara/error.hpp"

namespace mwepara {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidInput: return "InvalidInput";
    case ErrorCode::kEmptyResult: return "EmptyResult";
    case ErrorCode::kBackendError: return "BackendError";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kDegenerateInput: return "DegenerateInput";
    case ErrorCode::kNoClusters: return "NoClusters";
    case ErrorCode::kSpanMismatch: return "SpanMismatch";
    case ErrorCode::kMissingArtifact: return "MissingArtifact";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace mwepara
