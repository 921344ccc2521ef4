#include "sht/error.hpp"

namespace sht {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidSigma: return "InvalidSigma";
    case ErrorCode::DegenerateHeatmap: return "DegenerateHeatmap";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFiniteActivation: return "NonFiniteActivation";
    case ErrorCode::ScoreOutOfRange: return "ScoreOutOfRange";
    case ErrorCode::ExtractorUnavailable: return "ExtractorUnavailable";
    case ErrorCode::LandmarkOutOfFrame: return "LandmarkOutOfFrame";
    case ErrorCode::LandmarkCountMismatch: return "LandmarkCountMismatch";
    case ErrorCode::DegenerateNormalizer: return "DegenerateNormalizer";
    case ErrorCode::EmptyErrorList: return "EmptyErrorList";
    case ErrorCode::ImageTooSmall: return "ImageTooSmall";
    case ErrorCode::TooFewFrames: return "TooFewFrames";
    case ErrorCode::EmptyVideo: return "EmptyVideo";
    case ErrorCode::MissingAnnotation: return "MissingAnnotation";
    case ErrorCode::MalformedLandmarkFile: return "MalformedLandmarkFile";
    case ErrorCode::ImageReadError: return "ImageReadError";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::PhaseViolation: return "PhaseViolation";
    case ErrorCode::CheckpointReadError: return "CheckpointReadError";
    case ErrorCode::CheckpointWriteError: return "CheckpointWriteError";
    case ErrorCode::CheckpointMismatch: return "CheckpointMismatch";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace sht
