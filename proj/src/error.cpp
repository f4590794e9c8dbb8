#include "protopipe/error.hpp"

namespace protopipe {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kMalformedHeader: return "MalformedHeader";
    case ErrorCode::kUnsupportedMaxval: return "UnsupportedMaxval";
    case ErrorCode::kTruncatedPayload: return "TruncatedPayload";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kSchemaViolation: return "SchemaViolation";
    case ErrorCode::kInvariantViolation: return "InvariantViolation";
    case ErrorCode::kFileNotFound: return "FileNotFound";
    case ErrorCode::kDecodeError: return "DecodeError";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kInsufficientFrames: return "InsufficientFrames";
    case ErrorCode::kFrameTooSmall: return "FrameTooSmall";
    case ErrorCode::kUnsupportedChannels: return "UnsupportedChannels";
    case ErrorCode::kEmptyClip: return "EmptyClip";
    case ErrorCode::kMissingFrameEmbedding: return "MissingFrameEmbedding";
    case ErrorCode::kInconsistentDim: return "InconsistentDim";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kEmptyClass: return "EmptyClass";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kUnknownUser: return "UnknownUser";
    case ErrorCode::kUnknownVideo: return "UnknownVideo";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace protopipe
