#pragma once

#include <stdexcept>
#include <string>

namespace scda {

enum class ErrorCode {
  // embedding core
  EmptyBag,
  NonFiniteInput,
  ZeroVector,
  EmptyCell,
  DegenerateFraction,
  BadMagic,
  VersionMismatch,
  TruncatedFile,
  DimensionMismatch,
  BadManifest,
  // loss
  UnnormalizedInput,
  NonPositiveTemperature,
  // sampler
  InfeasibleSpec,
  // adapter / trainer
  BadDimension,
  ZeroOutput,
  ShapeMismatch,
  DivergenceDetected,
  // classifier
  MissingClass,
  EmptyMatrix,
  // stain
  NotEnoughTissue,
  DegenerateStains,
  // synthetic benchmark
  InfeasibleSeparation,
  NotEnoughShots,
  // projection
  RankDeficient,
  // config / cli
  BadConfig,
  IoError,
};

inline const char* error_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::EmptyBag: return "EmptyBag";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::EmptyCell: return "EmptyCell";
    case ErrorCode::DegenerateFraction: return "DegenerateFraction";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::BadManifest: return "BadManifest";
    case ErrorCode::UnnormalizedInput: return "UnnormalizedInput";
    case ErrorCode::NonPositiveTemperature: return "NonPositiveTemperature";
    case ErrorCode::InfeasibleSpec: return "InfeasibleSpec";
    case ErrorCode::BadDimension: return "BadDimension";
    case ErrorCode::ZeroOutput: return "ZeroOutput";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::DivergenceDetected: return "DivergenceDetected";
    case ErrorCode::MissingClass: return "MissingClass";
    case ErrorCode::EmptyMatrix: return "EmptyMatrix";
    case ErrorCode::NotEnoughTissue: return "NotEnoughTissue";
    case ErrorCode::DegenerateStains: return "DegenerateStains";
    case ErrorCode::InfeasibleSeparation: return "InfeasibleSeparation";
    case ErrorCode::NotEnoughShots: return "NotEnoughShots";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::BadConfig: return "BadConfig";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool cond, ErrorCode code, const std::string& message) {
  if (!cond) fail(code, message);
}

}  // namespace scda
