#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cordmorph {

/// Every failure raised by the library carries one of these codes so callers
/// (and the CLI exit-code mapping) can branch without parsing messages.
enum class ErrorCode {
  InvalidArgument,
  // nifti_io
  NotNifti1,
  BadMagic,
  UnsupportedDatatype,
  TruncatedData,
  MultiFrame,
  InvalidHeader,
  CorruptContainer,
  ValueOverflow,
  PrecisionLoss,
  SingularAffine,
  AmbiguousAxis,
  InvalidOrientation,
  InvalidVolume,
  DegenerateTarget,
  // geometry
  NotRPI,
  NotBinary,
  NoQualifyingSlices,
  // seg_metrics
  GridMismatch,
  EmptyReference,
  EmptyMask,
  // drift
  InsufficientContrasts,
  InsufficientSubjects,
  DivisionByZeroValue,
  NoOverlap,
  UnknownVersion,
  DuplicateRecord,
  InvalidRecord,
  InvalidPolicy,
  // phantom / workflow
  InvalidPhantom,
  ShapeExceedsGrid,
  TooFewSubjects,
  InvalidManifest,
  InvalidConfig,
  IOFailure,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace cordmorph
