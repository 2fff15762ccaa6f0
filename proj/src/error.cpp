#include "uscal/error.hpp"

namespace uscal {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::InvalidGeometry: return "InvalidGeometry";
    case ErrorKind::AlphaOutOfRange: return "AlphaOutOfRange";
    case ErrorKind::EmptyArrangement: return "EmptyArrangement";
    case ErrorKind::BadEdgeId: return "BadEdgeId";
    case ErrorKind::EmptyMesh: return "EmptyMesh";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::VersionMismatch: return "VersionMismatch";
    case ErrorKind::NonPositiveDepth: return "NonPositiveDepth";
    case ErrorKind::DegenerateIntersection: return "DegenerateIntersection";
    case ErrorKind::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorKind::NoCorrespondences: return "NoCorrespondences";
    case ErrorKind::EmptyRoi: return "EmptyRoi";
    case ErrorKind::NotConverged: return "NotConverged";
    case ErrorKind::MatchFailed: return "MatchFailed";
    case ErrorKind::TooFewCorrespondences: return "TooFewCorrespondences";
    case ErrorKind::DegeneratePixelConfiguration: return "DegeneratePixelConfiguration";
    case ErrorKind::IllConditioned: return "IllConditioned";
    case ErrorKind::TooFewDetections: return "TooFewDetections";
    case ErrorKind::BehindCamera: return "BehindCamera";
    case ErrorKind::DegenerateQuad: return "DegenerateQuad";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

int exit_code_for(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidArgument:
    case ErrorKind::InvalidGeometry:
    case ErrorKind::AlphaOutOfRange:
    case ErrorKind::EmptyArrangement:
    case ErrorKind::BadEdgeId:
    case ErrorKind::EmptyMesh:
    case ErrorKind::ConfigError:
    case ErrorKind::ParseError:
    case ErrorKind::VersionMismatch:
      return 2;
    case ErrorKind::IoError:
      return 4;
    default:
      return 3;
  }
}

}  // namespace uscal
