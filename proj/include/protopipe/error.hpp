#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace protopipe {

enum class ErrorCode {
  kDimensionMismatch,
  kEmptyInput,
  kMalformedHeader,
  kUnsupportedMaxval,
  kTruncatedPayload,
  kParseError,
  kSchemaViolation,
  kInvariantViolation,
  kFileNotFound,
  kDecodeError,
  kIoError,
  kInsufficientFrames,
  kFrameTooSmall,
  kUnsupportedChannels,
  kEmptyClip,
  kMissingFrameEmbedding,
  kInconsistentDim,
  kShapeMismatch,
  kEmptyClass,
  kLengthMismatch,
  kUnknownUser,
  kUnknownVideo,
  kInvalidArgument,
};

std::string_view to_string(ErrorCode code);

// Every failure in the library is reported through this type. The code is
// stable and is what tests and the CLI dispatch on; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace protopipe
