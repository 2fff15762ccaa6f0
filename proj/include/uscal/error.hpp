#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace uscal {

enum class ErrorKind {
  // configuration / input validation
  InvalidArgument,
  InvalidGeometry,
  AlphaOutOfRange,
  EmptyArrangement,
  BadEdgeId,
  EmptyMesh,
  ConfigError,
  ParseError,
  VersionMismatch,
  // numerical failures
  NonPositiveDepth,
  DegenerateIntersection,
  DegenerateConfiguration,
  NoCorrespondences,
  EmptyRoi,
  NotConverged,
  MatchFailed,
  TooFewCorrespondences,
  DegeneratePixelConfiguration,
  IllConditioned,
  TooFewDetections,
  BehindCamera,
  DegenerateQuad,
  // filesystem
  IoError,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Process exit code for an error: 2 config/parse, 3 numerical, 4 I/O.
int exit_code_for(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace uscal
