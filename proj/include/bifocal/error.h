#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bifocal {

enum class ErrorCode {
  kInvalidArgument,
  kCoincidentCenters,
  kRankDeficient,
  kDegenerateLine,
  kDegenerateGeometry,
  kAmbiguousCheirality,
  kDuplicateEdge,
  kIndexOutOfRange,
  kRankNot2,
  kNotOrthonormal,
  kNotConnected,
  kMissingBlock,
  kNoConvergence,
  kInconsistentInput,
  kCyclicInconsistency,
  kInsufficientTracks,
  kDegenerateEpipole,
  kAlignmentIllConditioned,
  kNoValidPoint,
  kRotationAmbiguity,
  kMissingRecovery,
  kTooFewCameras,
  kNoTriangles,
  kUnconnectable,
  kTooFew,
  kPreconditionViolated,
  kParseError,
};

std::string_view ErrorCodeName(ErrorCode code);

// All library failures are reported through this exception; `code()` lets
// callers branch without parsing the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace bifocal
