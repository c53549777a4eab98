#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace echo {

enum class ErrorCode {
  kDimensionMismatch,
  kDuplicateId,
  kNonFiniteValue,
  kZeroNormVector,
  kFormatVersionMismatch,
  kCorruptFile,
  kIoError,
  kEmptyMemory,
  kEmptyIndex,
  kAlreadyIndexed,
  kUnknownEntry,
  kIndexMemoryMismatch,
  kParseError,
  kDuplicateClass,
  kMissingImage,
  kNoNormalSamples,
  kGatewayUnavailable,
  kGatewayTimeout,
  kMalformedResponse,
  kUnknownSource,
  kConfigError,
  kInvalidArgument,
};

std::string_view to_string(ErrorCode code);

// All library failures surface as echo::Error carrying a machine-checkable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  // The message without the leading "Code: ".
  std::string_view message() const noexcept { return std::string_view(what()).substr(to_string(code_).size() + 2); }

 private:
  ErrorCode code_;
};

}  // namespace echo
