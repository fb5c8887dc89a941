#include "cordmorph/error.hpp"

namespace cordmorph {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NotNifti1: return "NotNifti1";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::UnsupportedDatatype: return "UnsupportedDatatype";
    case ErrorCode::TruncatedData: return "TruncatedData";
    case ErrorCode::MultiFrame: return "MultiFrame";
    case ErrorCode::InvalidHeader: return "InvalidHeader";
    case ErrorCode::CorruptContainer: return "CorruptContainer";
    case ErrorCode::ValueOverflow: return "ValueOverflow";
    case ErrorCode::PrecisionLoss: return "PrecisionLoss";
    case ErrorCode::SingularAffine: return "SingularAffine";
    case ErrorCode::AmbiguousAxis: return "AmbiguousAxis";
    case ErrorCode::InvalidOrientation: return "InvalidOrientation";
    case ErrorCode::InvalidVolume: return "InvalidVolume";
    case ErrorCode::DegenerateTarget: return "DegenerateTarget";
    case ErrorCode::NotRPI: return "NotRPI";
    case ErrorCode::NotBinary: return "NotBinary";
    case ErrorCode::NoQualifyingSlices: return "NoQualifyingSlices";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::EmptyReference: return "EmptyReference";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::InsufficientContrasts: return "InsufficientContrasts";
    case ErrorCode::InsufficientSubjects: return "InsufficientSubjects";
    case ErrorCode::DivisionByZeroValue: return "DivisionByZeroValue";
    case ErrorCode::NoOverlap: return "NoOverlap";
    case ErrorCode::UnknownVersion: return "UnknownVersion";
    case ErrorCode::DuplicateRecord: return "DuplicateRecord";
    case ErrorCode::InvalidRecord: return "InvalidRecord";
    case ErrorCode::InvalidPolicy: return "InvalidPolicy";
    case ErrorCode::InvalidPhantom: return "InvalidPhantom";
    case ErrorCode::ShapeExceedsGrid: return "ShapeExceedsGrid";
    case ErrorCode::TooFewSubjects: return "TooFewSubjects";
    case ErrorCode::InvalidManifest: return "InvalidManifest";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::IOFailure: return "IOFailure";
  }
  return "Unknown";
}

}  // namespace cordmorph
