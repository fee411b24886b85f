#ifndef VOXELFLOW_ERROR_HPP
#define VOXELFLOW_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace voxelflow {

enum class Errc {
  UnsupportedDatatype,
  BadMagic,
  TruncatedFile,
  DimOverflow,
  IoFailure,
  NonFiniteData,
  OutOfBounds,
  InvalidParam,
  NotPsd,
  DofTooSmall,
  EmptyTruncation,
  DimensionMismatch,
  Singular,
  CenterMasked,
  IndexOutOfRange,
  EmptyGroup,
  InconsistentDims,
  MismatchedDraws,
};

std::string_view to_string(Errc code);

// Single exception type for the library; callers switch on code().
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace voxelflow

#endif  // VOXELFLOW_ERROR_HPP
