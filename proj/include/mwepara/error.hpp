#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mwepara {

enum class ErrorCode {
  kInvalidInput,
  kEmptyResult,
  kBackendError,
  kDimensionMismatch,
  kDegenerateInput,
  kNoClusters,
  kSpanMismatch,
  kMissingArtifact,
  kIoError,
};

std::string_view error_code_name(ErrorCode code);

// Every failure the library reports is an Error carrying one of the codes
// above; the message is free-form context (record ids, paths, causes).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code),
        message_(message) {}

  ErrorCode code() const noexcept { return code_; }
  // The message without the code prefix, for re-wrapping with more context.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

}  // namespace mwepara
