#include "curvreg/error.hpp"

namespace curvreg {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::DegenerateCorrespondences: return "DegenerateCorrespondences";
    case ErrorCode::EmptyProjection: return "EmptyProjection";
    case ErrorCode::ConstantImage: return "ConstantImage";
    case ErrorCode::NoValidRange: return "NoValidRange";
    case ErrorCode::ImageTooSmall: return "ImageTooSmall";
    case ErrorCode::GeometryMismatch: return "GeometryMismatch";
    case ErrorCode::ScaleOutOfRange: return "ScaleOutOfRange";
    case ErrorCode::TooFewScales: return "TooFewScales";
    case ErrorCode::ZeroGradient: return "ZeroGradient";
    case ErrorCode::NoFeatures: return "NoFeatures";
    case ErrorCode::InsufficientMatches: return "InsufficientMatches";
    case ErrorCode::ConsensusFailure: return "ConsensusFailure";
    case ErrorCode::EmptySamples: return "EmptySamples";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::SensorBelowTerrain: return "SensorBelowTerrain";
    case ErrorCode::UnknownFormat: return "UnknownFormat";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::EmptyCloud: return "EmptyCloud";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
  }
  return "UnknownError";
}

}  // namespace curvreg
