#include "echo/error.hpp"

namespace echo {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kDuplicateId: return "DuplicateId";
    case ErrorCode::kNonFiniteValue: return "NonFiniteValue";
    case ErrorCode::kZeroNormVector: return "ZeroNormVector";
    case ErrorCode::kFormatVersionMismatch: return "FormatVersionMismatch";
    case ErrorCode::kCorruptFile: return "CorruptFile";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kEmptyMemory: return "EmptyMemory";
    case ErrorCode::kEmptyIndex: return "EmptyIndex";
    case ErrorCode::kAlreadyIndexed: return "AlreadyIndexed";
    case ErrorCode::kUnknownEntry: return "UnknownEntry";
    case ErrorCode::kIndexMemoryMismatch: return "IndexMemoryMismatch";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kDuplicateClass: return "DuplicateClass";
    case ErrorCode::kMissingImage: return "MissingImage";
    case ErrorCode::kNoNormalSamples: return "NoNormalSamples";
    case ErrorCode::kGatewayUnavailable: return "GatewayUnavailable";
    case ErrorCode::kGatewayTimeout: return "GatewayTimeout";
    case ErrorCode::kMalformedResponse: return "MalformedResponse";
    case ErrorCode::kUnknownSource: return "UnknownSource";
    case ErrorCode::kConfigError: return "ConfigError";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace echo
