#include "voxelflow/volume.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include "voxelflow/error.hpp"

namespace voxelflow {

namespace {

constexpr int kHeaderSize = 348;
constexpr int kVoxOffset = 352;

enum NiftiType : std::int16_t {
  kUint8 = 2,
  kInt16 = 4,
  kInt32 = 8,
  kFloat32 = 16,
  kFloat64 = 64,
};

// Header byte offsets for the fields we honor.
constexpr std::size_t kOffDim = 40;
constexpr std::size_t kOffDatatype = 70;
constexpr std::size_t kOffPixdim = 76;
constexpr std::size_t kOffBitpix = 72;
constexpr std::size_t kOffVoxOffset = 108;
constexpr std::size_t kOffSclSlope = 112;
constexpr std::size_t kOffSclInter = 116;
constexpr std::size_t kOffMagic = 344;

template <typename T>
T byteswap_value(T value) {
  auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
  std::reverse(bytes.begin(), bytes.end());
  return std::bit_cast<T>(bytes);
}

template <typename T>
T load(const unsigned char* p, bool swap) {
  T value;
  std::memcpy(&value, p, sizeof(T));
  return swap ? byteswap_value(value) : value;
}

template <typename T>
void store(unsigned char* p, T value) {
  std::memcpy(p, &value, sizeof(T));
}

std::vector<unsigned char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoFailure, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int bytes_per_voxel(std::int16_t datatype) {
  switch (datatype) {
    case kUint8: return 1;
    case kInt16: return 2;
    case kInt32: return 4;
    case kFloat32: return 4;
    case kFloat64: return 8;
    default: return 0;
  }
}

double decode(const unsigned char* p, std::int16_t datatype, bool swap) {
  switch (datatype) {
    case kUint8: return static_cast<double>(*p);
    case kInt16: return static_cast<double>(load<std::int16_t>(p, swap));
    case kInt32: return static_cast<double>(load<std::int32_t>(p, swap));
    case kFloat32: return static_cast<double>(load<float>(p, swap));
    case kFloat64: return load<double>(p, swap);
    default: throw Error(Errc::UnsupportedDatatype, "datatype " + std::to_string(datatype));
  }
}

// Disk order is i fastest, then j, k, t; memory order is voxel-major.
std::vector<double> to_voxel_major(const std::vector<double>& disk, std::size_t voxels, int frames) {
  std::vector<double> out(disk.size());
  for (int t = 0; t < frames; ++t) {
    for (std::size_t v = 0; v < voxels; ++v) out[v * frames + t] = disk[t * voxels + v];
  }
  return out;
}

void check_finite(std::span<const double> data) {
  for (std::size_t n = 0; n < data.size(); ++n) {
    if (!std::isfinite(data[n])) {
      throw Error(Errc::NonFiniteData, "non-finite value at flat index " + std::to_string(n));
    }
  }
}

std::filesystem::path meta_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".meta");
}

}  // namespace

Voxel Dims3::voxel(std::size_t index) const {
  Voxel v;
  v.i = static_cast<int>(index % d1);
  index /= d1;
  v.j = static_cast<int>(index % d2);
  v.k = static_cast<int>(index / d2);
  return v;
}

Volume4D::Volume4D(Dims3 dims, int frames, std::vector<double> data, double time_step, NonFinite policy)
    : dims_(dims), frames_(frames), time_step_(time_step), data_(std::move(data)) {
  if (dims.d1 <= 0 || dims.d2 <= 0 || dims.d3 <= 0 || frames <= 0) {
    throw Error(Errc::InvalidParam, "volume dims must be positive");
  }
  if (data_.size() != dims.count() * static_cast<std::size_t>(frames)) {
    throw Error(Errc::InvalidParam, "data length does not match d1*d2*d3*T");
  }
  if (policy == NonFinite::Reject) check_finite(data_);
}

Volume4D Volume4D::filled(Dims3 dims, int frames, double value, double time_step) {
  const std::size_t n = dims.count() * static_cast<std::size_t>(std::max(frames, 0));
  return Volume4D(dims, frames, std::vector<double>(n, value), time_step);
}

std::span<const double> Volume4D::series_view(const Voxel& v) const {
  if (!dims_.contains(v)) throw Error(Errc::OutOfBounds, "voxel outside volume");
  return std::span<const double>(data_).subspan(dims_.index(v) * frames_, frames_);
}

Mask3D::Mask3D(Dims3 dims, std::vector<bool> flags) : dims_(dims), flags_(std::move(flags)) {
  if (flags_.size() != dims_.count()) throw Error(Errc::InvalidParam, "mask size mismatch");
}

Mask3D Mask3D::full(Dims3 dims) { return Mask3D(dims, std::vector<bool>(dims.count(), true)); }

Mask3D Mask3D::from_volume(const Volume4D& vol) {
  std::vector<bool> flags(vol.dims().count());
  for (std::size_t v = 0; v < flags.size(); ++v) flags[v] = vol.data()[v * vol.frames()] != 0.0;
  return Mask3D(vol.dims(), std::move(flags));
}

std::size_t Mask3D::count() const { return static_cast<std::size_t>(std::count(flags_.begin(), flags_.end(), true)); }

std::vector<double> extract_series(const Volume4D& vol, const Voxel& voxel) {
  const auto view = vol.series_view(voxel);
  return {view.begin(), view.end()};
}

Volume4D read_nifti(const std::filesystem::path& path, NonFinite policy) {
  const auto bytes = slurp(path);
  if (bytes.size() < static_cast<std::size_t>(kHeaderSize)) {
    throw Error(Errc::TruncatedFile, "header shorter than 348 bytes");
  }
  const unsigned char* h = bytes.data();
  bool swap = false;
  if (load<std::int32_t>(h, false) != kHeaderSize) {
    if (load<std::int32_t>(h, true) != kHeaderSize) throw Error(Errc::BadMagic, "sizeof_hdr is not 348");
    swap = true;
  }
  const char* magic = reinterpret_cast<const char*>(h + kOffMagic);
  if (std::memcmp(magic, "n+1\0", 4) != 0 && std::memcmp(magic, "ni1\0", 4) != 0) {
    throw Error(Errc::BadMagic, "magic is not n+1 or ni1");
  }

  std::array<std::int16_t, 8> dim{};
  for (int n = 0; n < 8; ++n) dim[n] = load<std::int16_t>(h + kOffDim + 2 * n, swap);
  if (dim[0] != 3 && dim[0] != 4) throw Error(Errc::DimOverflow, "dim[0] must be 3 or 4");
  const int frames = dim[0] == 4 ? dim[4] : 1;
  if (dim[1] <= 0 || dim[2] <= 0 || dim[3] <= 0 || frames <= 0) {
    throw Error(Errc::DimOverflow, "nonpositive dimension in header");
  }
  const Dims3 dims{dim[1], dim[2], dim[3]};

  const auto datatype = load<std::int16_t>(h + kOffDatatype, swap);
  const int width = bytes_per_voxel(datatype);
  if (width == 0) throw Error(Errc::UnsupportedDatatype, "datatype " + std::to_string(datatype));

  float slope = load<float>(h + kOffSclSlope, swap);
  const float inter = load<float>(h + kOffSclInter, swap);
  if (slope == 0.0f || !std::isfinite(slope)) slope = 1.0f;
  const float offset_f = load<float>(h + kOffVoxOffset, swap);
  const std::size_t offset = std::max<std::size_t>(
      std::isfinite(offset_f) && offset_f > 0 ? static_cast<std::size_t>(offset_f) : 0, kHeaderSize);

  const float tr_f = load<float>(h + kOffPixdim + 16, swap);
  const double tr = std::isfinite(tr_f) && tr_f > 0.0f ? static_cast<double>(tr_f) : 0.0;

  const std::size_t voxels = dims.count();
  const std::size_t total = voxels * static_cast<std::size_t>(frames);
  if (bytes.size() < offset || (bytes.size() - offset) / width < total) {
    throw Error(Errc::TruncatedFile, "image data shorter than header dims imply");
  }
  std::vector<double> disk(total);
  const unsigned char* p = bytes.data() + offset;
  for (std::size_t n = 0; n < total; ++n, p += width) {
    disk[n] = decode(p, datatype, swap) * static_cast<double>(slope) + static_cast<double>(inter);
  }
  return Volume4D(dims, frames, to_voxel_major(disk, voxels, frames), tr, policy);
}

void write_nifti(const Volume4D& vol, const std::filesystem::path& path) {
  const Dims3& d = vol.dims();
  constexpr int kMax = 32767;
  if (d.d1 > kMax || d.d2 > kMax || d.d3 > kMax || vol.frames() > kMax) {
    throw Error(Errc::DimOverflow, "dimension exceeds int16 header field");
  }
  std::vector<unsigned char> header(kVoxOffset, 0);
  store<std::int32_t>(header.data(), kHeaderSize);
  const std::array<std::int16_t, 8> dim = {
      static_cast<std::int16_t>(vol.frames() == 1 ? 3 : 4), static_cast<std::int16_t>(d.d1),
      static_cast<std::int16_t>(d.d2), static_cast<std::int16_t>(d.d3),
      static_cast<std::int16_t>(vol.frames()), 1, 1, 1};
  for (int n = 0; n < 8; ++n) store<std::int16_t>(header.data() + kOffDim + 2 * n, dim[n]);
  store<std::int16_t>(header.data() + kOffDatatype, kFloat32);
  store<std::int16_t>(header.data() + kOffBitpix, 32);
  for (int n = 1; n <= 3; ++n) store<float>(header.data() + kOffPixdim + 4 * n, 1.0f);
  store<float>(header.data() + kOffPixdim + 16, static_cast<float>(vol.time_step()));
  store<float>(header.data() + kOffVoxOffset, static_cast<float>(kVoxOffset));
  store<float>(header.data() + kOffSclSlope, 1.0f);
  std::memcpy(header.data() + kOffMagic, "n+1\0", 4);

  const std::size_t voxels = d.count();
  const int frames = vol.frames();
  std::vector<float> disk(voxels * frames);
  const auto data = vol.data();
  for (int t = 0; t < frames; ++t) {
    for (std::size_t v = 0; v < voxels; ++v) disk[t * voxels + v] = static_cast<float>(data[v * frames + t]);
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoFailure, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(header.data()), static_cast<std::streamsize>(header.size()));
  out.write(reinterpret_cast<const char*>(disk.data()), static_cast<std::streamsize>(disk.size() * sizeof(float)));
  if (!out) throw Error(Errc::IoFailure, "write failed for " + path.string());
}

Volume4D read_raw(const std::filesystem::path& path, NonFinite policy) {
  std::ifstream meta(meta_path(path));
  if (!meta) throw Error(Errc::IoFailure, "missing sidecar " + meta_path(path).string());
  std::array<long, 4> dims{0, 0, 0, 0};
  double tr = 0.0;
  bool have_dims = false;
  std::string line;
  while (std::getline(meta, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    if (key == "dims") {
      std::replace(value.begin(), value.end(), ',', ' ');
      std::istringstream ss(value);
      have_dims = static_cast<bool>(ss >> dims[0] >> dims[1] >> dims[2] >> dims[3]);
    } else if (key == "tr") {
      tr = std::stod(value);
    }
  }
  if (!have_dims) throw Error(Errc::InvalidParam, "sidecar lacks dims=d1,d2,d3,T");
  for (long v : dims) {
    if (v <= 0 || v > (1L << 24)) throw Error(Errc::DimOverflow, "sidecar dims out of range");
  }

  const auto bytes = slurp(path);
  const Dims3 d{static_cast<int>(dims[0]), static_cast<int>(dims[1]), static_cast<int>(dims[2])};
  const int frames = static_cast<int>(dims[3]);
  const std::size_t total = d.count() * static_cast<std::size_t>(frames);
  if (bytes.size() < total * 4) throw Error(Errc::TruncatedFile, "raw stream shorter than dims imply");
  const bool swap = std::endian::native != std::endian::little;
  std::vector<double> disk(total);
  for (std::size_t n = 0; n < total; ++n) disk[n] = load<float>(bytes.data() + 4 * n, swap);
  return Volume4D(d, frames, to_voxel_major(disk, d.count(), frames), tr, policy);
}

void write_raw(const Volume4D& vol, const std::filesystem::path& path) {
  const Dims3& d = vol.dims();
  const std::size_t voxels = d.count();
  const int frames = vol.frames();
  const bool swap = std::endian::native != std::endian::little;
  std::vector<unsigned char> bytes(voxels * frames * 4);
  const auto data = vol.data();
  for (int t = 0; t < frames; ++t) {
    for (std::size_t v = 0; v < voxels; ++v) {
      float value = static_cast<float>(data[v * frames + t]);
      if (swap) value = byteswap_value(value);
      store<float>(bytes.data() + 4 * (t * voxels + v), value);
    }
  }
  std::ofstream out(path, std::ios::binary);
  std::ofstream meta(meta_path(path));
  if (!out || !meta) throw Error(Errc::IoFailure, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  meta << "dims=" << d.d1 << ',' << d.d2 << ',' << d.d3 << ',' << frames << '\n';
  meta << "tr=" << vol.time_step() << '\n';
  if (!out || !meta) throw Error(Errc::IoFailure, "write failed for " + path.string());
}

Volume4D read_volume(const std::filesystem::path& path, NonFinite policy) {
  return path.extension() == ".raw" ? read_raw(path, policy) : read_nifti(path, policy);
}

void write_volume(const Volume4D& vol, const std::filesystem::path& path) {
  if (path.extension() == ".raw") {
    write_raw(vol, path);
  } else {
    write_nifti(vol, path);
  }
}

}  // namespace voxelflow
