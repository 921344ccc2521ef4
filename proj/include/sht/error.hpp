#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sht {

enum class ErrorCode {
  InvalidConfig,
  InvalidArgument,
  InvalidSigma,
  DegenerateHeatmap,
  ShapeMismatch,
  NonFiniteActivation,
  ScoreOutOfRange,
  ExtractorUnavailable,
  LandmarkOutOfFrame,
  LandmarkCountMismatch,
  DegenerateNormalizer,
  EmptyErrorList,
  ImageTooSmall,
  TooFewFrames,
  EmptyVideo,
  MissingAnnotation,
  MalformedLandmarkFile,
  ImageReadError,
  NonFiniteLoss,
  PhaseViolation,
  CheckpointReadError,
  CheckpointWriteError,
  CheckpointMismatch,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the library; `code()` carries the failure class.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

inline void require(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) fail(code, what);
}

}  // namespace sht
