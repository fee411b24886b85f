#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>
#include <vector>

#include "voxelflow/error.hpp"
#include "voxelflow/rng.hpp"
#include "voxelflow/volume.hpp"

using namespace voxelflow;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "voxelflow_unit";
  fs::create_directories(dir);
  return dir / name;
}

std::vector<unsigned char> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::vector<unsigned char>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void reverse_word(std::vector<unsigned char>& b, std::size_t off, std::size_t width) {
  std::reverse(b.begin() + off, b.begin() + off + width);
}

Volume4D random_volume(Dims3 dims, int frames, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> data(dims.count() * frames);
  for (double& v : data) v = static_cast<double>(static_cast<float>(rng.normal() * 10.0));
  return Volume4D(dims, frames, std::move(data), 2.0);
}

// Every header field the reader honors plus every float32 data word, reversed.
std::vector<unsigned char> byteswapped_copy(std::vector<unsigned char> b) {
  reverse_word(b, 0, 4);                                       // sizeof_hdr
  for (int n = 0; n < 8; ++n) reverse_word(b, 40 + 2 * n, 2);  // dim
  reverse_word(b, 70, 2);                                      // datatype
  reverse_word(b, 72, 2);                                      // bitpix
  for (int n = 0; n < 8; ++n) reverse_word(b, 76 + 4 * n, 4);  // pixdim
  reverse_word(b, 108, 4);                                     // vox_offset
  reverse_word(b, 112, 4);                                     // scl_slope
  reverse_word(b, 116, 4);                                     // scl_inter
  for (std::size_t off = 352; off + 4 <= b.size(); off += 4) reverse_word(b, off, 4);
  return b;
}

}  // namespace

TEST_CASE("nifti round trip is exact for float32 values") {
  const Volume4D v = random_volume({3, 4, 5}, 6, 11);
  const fs::path p = scratch("roundtrip.nii");
  write_nifti(v, p);
  const Volume4D r = read_nifti(p);
  CHECK(r.dims() == v.dims());
  CHECK(r.frames() == v.frames());
  CHECK(r.time_step() == doctest::Approx(2.0));
  CHECK(std::equal(r.data().begin(), r.data().end(), v.data().begin()));
}

TEST_CASE("nifti file size is header plus float32 payload") {
  const fs::path p = scratch("size.nii");
  write_nifti(Volume4D::filled({2, 2, 2}, 3, 1.5), p);
  CHECK(fs::file_size(p) == 352 + 2 * 2 * 2 * 3 * 4);
}

TEST_CASE("byte-swapped file reads the same as the native one") {
  const Volume4D v = random_volume({4, 3, 2}, 5, 12);
  const fs::path native = scratch("native.nii");
  const fs::path swapped = scratch("swapped.nii");
  write_nifti(v, native);
  spit(swapped, byteswapped_copy(slurp(native)));
  const Volume4D r = read_nifti(swapped);
  CHECK(r.dims() == v.dims());
  CHECK(r.frames() == v.frames());
  CHECK(std::equal(r.data().begin(), r.data().end(), v.data().begin()));
}

TEST_CASE("scl_slope and scl_inter are applied, zero slope means one") {
  const fs::path p = scratch("scaled.nii");
  write_nifti(Volume4D::filled({2, 1, 1}, 2, 3.0), p);
  auto bytes = slurp(p);
  auto put_float = [&](std::size_t off, float x) { std::memcpy(bytes.data() + off, &x, 4); };
  put_float(112, 2.0f);
  put_float(116, 0.5f);
  spit(p, bytes);
  CHECK(read_nifti(p).at({1, 0, 0}, 1) == doctest::Approx(6.5));
  put_float(112, 0.0f);
  spit(p, bytes);
  CHECK(read_nifti(p).at({1, 0, 0}, 1) == doctest::Approx(3.5));
}

TEST_CASE("integer datatypes and 3D files decode") {
  const fs::path p = scratch("int16.nii");
  write_nifti(Volume4D::filled({2, 2, 1}, 1, 0.0), p);
  auto bytes = slurp(p);
  const std::int16_t dim0 = 3, datatype = 4, bitpix = 16;
  std::memcpy(bytes.data() + 40, &dim0, 2);
  std::memcpy(bytes.data() + 70, &datatype, 2);
  std::memcpy(bytes.data() + 72, &bitpix, 2);
  bytes.resize(352 + 4 * 2);
  const std::int16_t values[4] = {-3, 7, 1000, -32768};
  std::memcpy(bytes.data() + 352, values, sizeof(values));
  spit(p, bytes);
  const Volume4D r = read_nifti(p);
  CHECK(r.frames() == 1);
  CHECK(r.at({0, 0, 0}, 0) == -3.0);
  CHECK(r.at({1, 0, 0}, 0) == 7.0);
  CHECK(r.at({0, 1, 0}, 0) == 1000.0);
  CHECK(r.at({1, 1, 0}, 0) == -32768.0);
}

TEST_CASE("reader error codes") {
  const fs::path p = scratch("bad.nii");
  write_nifti(Volume4D::filled({2, 2, 2}, 2, 1.0), p);
  const auto good = slurp(p);

  auto expect = [&](std::vector<unsigned char> bytes, Errc code) {
    spit(p, bytes);
    try {
      (void)read_nifti(p);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == code);
    }
  };

  auto magic = good;
  std::memcpy(magic.data() + 344, "ABCD", 4);
  expect(magic, Errc::BadMagic);

  auto dtype = good;
  const std::int16_t complex64 = 32;
  std::memcpy(dtype.data() + 70, &complex64, 2);
  expect(dtype, Errc::UnsupportedDatatype);

  auto shortfile = good;
  shortfile.resize(shortfile.size() - 5);
  expect(shortfile, Errc::TruncatedFile);

  expect(std::vector<unsigned char>(good.begin(), good.begin() + 100), Errc::TruncatedFile);
}

TEST_CASE("oversized dims overflow the int16 header") {
  CHECK_THROWS_AS(write_nifti(Volume4D::filled({40000, 1, 1}, 1, 0.0), scratch("huge.nii")), Error);
  try {
    write_nifti(Volume4D::filled({40000, 1, 1}, 1, 0.0), scratch("huge.nii"));
  } catch (const Error& e) {
    CHECK(e.code() == Errc::DimOverflow);
  }
}

TEST_CASE("non-finite input is rejected unless allowed") {
  std::vector<double> data{1.0, std::nan(""), 2.0, 3.0};
  CHECK_THROWS_AS(Volume4D({2, 1, 1}, 2, data), Error);
  CHECK_NOTHROW(Volume4D({2, 1, 1}, 2, data, 0.0, NonFinite::Allow));
  const fs::path p = scratch("nan.nii");
  write_nifti(Volume4D({2, 1, 1}, 2, data, 0.0, NonFinite::Allow), p);
  try {
    (void)read_nifti(p);
    FAIL("expected NonFiniteData");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NonFiniteData);
  }
  CHECK(std::isnan(read_nifti(p, NonFinite::Allow).at({0, 0, 0}, 1)));
}

TEST_CASE("raw format round trip with sidecar") {
  const Volume4D v = random_volume({3, 2, 2}, 4, 13);
  const fs::path p = scratch("vol.raw");
  write_volume(v, p);
  CHECK(fs::exists(p.string() + ".meta"));
  const Volume4D r = read_volume(p);
  CHECK(r.dims() == v.dims());
  CHECK(r.time_step() == 2.0);
  CHECK(std::equal(r.data().begin(), r.data().end(), v.data().begin()));
}

TEST_CASE("extract_series") {
  SUBCASE("constant volume") {
    const auto s = extract_series(Volume4D::filled({3, 3, 3}, 7, 5.0), {1, 2, 0});
    CHECK(s == std::vector<double>(7, 5.0));
  }
  SUBCASE("values follow the flat index formula") {
    const Dims3 d{3, 4, 2};
    const int T = 5;
    std::vector<double> data(d.count() * T);
    std::iota(data.begin(), data.end(), 0.0);
    const Volume4D v(d, T, data);
    for (std::size_t idx = 0; idx < d.count(); ++idx) {
      const Voxel vx = d.voxel(idx);
      const auto s = extract_series(v, vx);
      for (int t = 0; t < T; ++t) CHECK(s[t] == static_cast<double>((vx.i + 3 * (vx.j + 4 * vx.k)) * T + t));
    }
  }
  SUBCASE("out of range") {
    try {
      (void)extract_series(Volume4D::filled({2, 2, 2}, 1, 0.0), {0, 0, 2});
      FAIL("expected OutOfBounds");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::OutOfBounds);
    }
  }
}

TEST_CASE("series extraction over all voxels reconstructs a random volume") {
  const Volume4D v = random_volume({4, 3, 3}, 6, 14);
  std::vector<double> rebuilt(v.data().size());
  for (std::size_t idx = 0; idx < v.dims().count(); ++idx) {
    const auto s = extract_series(v, v.dims().voxel(idx));
    for (int t = 0; t < v.frames(); ++t) rebuilt[idx * v.frames() + t] = s[t];
  }
  CHECK(std::equal(rebuilt.begin(), rebuilt.end(), v.data().begin()));
}

TEST_CASE("mask from the first frame") {
  std::vector<double> data{0.0, 1.0, 2.0, 0.0, 4.0, 0.0, 3.0, 3.0};
  const Mask3D m = Mask3D::from_volume(Volume4D({2, 2, 1}, 2, data));
  CHECK(m.count() == 3);
  CHECK_FALSE(m.contains({0, 0, 0}));
  CHECK(m.contains({1, 0, 0}));
  CHECK(m.contains({0, 1, 0}));
  CHECK(m.contains({1, 1, 0}));
}
