#pragma once

#include <stdexcept>
#include <string>

namespace curvreg {

/// Failure conditions surfaced by the library. Each maps to one contract
/// violation or unrecoverable runtime condition; callers can branch on the
/// code without parsing messages.
enum class ErrorCode {
  // geometry
  DegenerateCorrespondences,
  // range image
  EmptyProjection,
  ConstantImage,
  NoValidRange,
  // curvelet transform
  ImageTooSmall,
  GeometryMismatch,
  ScaleOutOfRange,
  // features
  TooFewScales,
  ZeroGradient,
  // matching
  NoFeatures,
  InsufficientMatches,
  ConsensusFailure,
  // evaluation
  EmptySamples,
  LengthMismatch,
  SensorBelowTerrain,
  // io / config
  UnknownFormat,
  ParseError,
  EmptyCloud,
  IoError,
  InvalidConfig,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code), message_(message) {}

  ErrorCode code() const noexcept { return code_; }
  /// Message without the code prefix (used when re-tagging with a stage name).
  const std::string& message() const noexcept { return message_; }

private:
  ErrorCode code_;
  std::string message_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace curvreg
