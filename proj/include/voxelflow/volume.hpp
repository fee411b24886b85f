#ifndef VOXELFLOW_VOLUME_HPP
#define VOXELFLOW_VOLUME_HPP

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace voxelflow {

struct Voxel {
  int i = 0;
  int j = 0;
  int k = 0;

  friend bool operator==(const Voxel&, const Voxel&) = default;
};

struct Dims3 {
  int d1 = 0;
  int d2 = 0;
  int d3 = 0;

  std::size_t count() const { return static_cast<std::size_t>(d1) * d2 * d3; }
  bool contains(const Voxel& v) const {
    return v.i >= 0 && v.j >= 0 && v.k >= 0 && v.i < d1 && v.j < d2 && v.k < d3;
  }
  // Spatial linear index, i fastest.
  std::size_t index(const Voxel& v) const {
    return static_cast<std::size_t>(v.i) + static_cast<std::size_t>(d1) * (v.j + static_cast<std::size_t>(d2) * v.k);
  }
  Voxel voxel(std::size_t index) const;

  friend bool operator==(const Dims3&, const Dims3&) = default;
};

// Masked-free 4D BOLD array.
//
// Storage is voxel-major with time contiguous:
//   flat(i, j, k, t) = (i + d1 * (j + d2 * k)) * T + t
// so a voxel's series is one contiguous span. Immutable after construction.
enum class NonFinite { Reject, Allow };

class Volume4D {
 public:
  Volume4D() = default;
  // Throws InvalidParam on nonpositive dims or size mismatch, NonFiniteData on NaN/Inf.
  Volume4D(Dims3 dims, int frames, std::vector<double> data, double time_step = 0.0,
           NonFinite policy = NonFinite::Reject);

  static Volume4D filled(Dims3 dims, int frames, double value, double time_step = 0.0);

  const Dims3& dims() const { return dims_; }
  int frames() const { return frames_; }
  double time_step() const { return time_step_; }
  std::span<const double> data() const { return data_; }

  double at(const Voxel& v, int t) const { return data_[dims_.index(v) * frames_ + t]; }
  std::span<const double> series_view(const Voxel& v) const;

 private:
  Dims3 dims_;
  int frames_ = 0;
  double time_step_ = 0.0;
  std::vector<double> data_;
};

class Mask3D {
 public:
  Mask3D() = default;
  Mask3D(Dims3 dims, std::vector<bool> flags);
  static Mask3D full(Dims3 dims);
  // Nonzero voxels of the first frame are in-mask.
  static Mask3D from_volume(const Volume4D& vol);

  const Dims3& dims() const { return dims_; }
  bool contains(const Voxel& v) const { return dims_.contains(v) && flags_[dims_.index(v)]; }
  bool flag(std::size_t index) const { return flags_[index]; }
  std::size_t count() const;

 private:
  Dims3 dims_;
  std::vector<bool> flags_;
};

// The T values at a voxel in time order. Throws OutOfBounds.
std::vector<double> extract_series(const Volume4D& vol, const Voxel& voxel);

// Output maps carry NaN outside the mask; read them with NonFinite::Allow.
Volume4D read_nifti(const std::filesystem::path& path, NonFinite policy = NonFinite::Reject);
// Single-file NIfTI-1, float32, native byte order, vox_offset 352.
void write_nifti(const Volume4D& vol, const std::filesystem::path& path);

// Raw fallback: little-endian float32 stream at `path` plus a key=value
// sidecar at `path + ".meta"` with `dims=d1,d2,d3,T` and `tr=<seconds>`.
Volume4D read_raw(const std::filesystem::path& path, NonFinite policy = NonFinite::Reject);
void write_raw(const Volume4D& vol, const std::filesystem::path& path);

// Dispatch on extension: ".raw" uses the raw format, anything else NIfTI.
Volume4D read_volume(const std::filesystem::path& path, NonFinite policy = NonFinite::Reject);
void write_volume(const Volume4D& vol, const std::filesystem::path& path);

}  // namespace voxelflow

#endif  // VOXELFLOW_VOLUME_HPP
