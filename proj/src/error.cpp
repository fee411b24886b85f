#include "voxelflow/error.hpp"

namespace voxelflow {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::UnsupportedDatatype: return "UnsupportedDatatype";
    case Errc::BadMagic: return "BadMagic";
    case Errc::TruncatedFile: return "TruncatedFile";
    case Errc::DimOverflow: return "DimOverflow";
    case Errc::IoFailure: return "IoFailure";
    case Errc::NonFiniteData: return "NonFiniteData";
    case Errc::OutOfBounds: return "OutOfBounds";
    case Errc::InvalidParam: return "InvalidParam";
    case Errc::NotPsd: return "NotPsd";
    case Errc::DofTooSmall: return "DofTooSmall";
    case Errc::EmptyTruncation: return "EmptyTruncation";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::Singular: return "Singular";
    case Errc::CenterMasked: return "CenterMasked";
    case Errc::IndexOutOfRange: return "IndexOutOfRange";
    case Errc::EmptyGroup: return "EmptyGroup";
    case Errc::InconsistentDims: return "InconsistentDims";
    case Errc::MismatchedDraws: return "MismatchedDraws";
  }
  return "Unknown";
}

}  // namespace voxelflow
