#ifndef VOXELFLOW_RNG_HPP
#define VOXELFLOW_RNG_HPP

#include <array>
#include <cstdint>
#include <initializer_list>
#include <limits>

namespace voxelflow {

// Counter-based generator (Philox4x32-10). A stream is fully determined by
// (seed, stream words); e.g. Rng(seed, {voxel, replicate}). Streams never
// depend on thread scheduling, which is what makes parallel maps reproducible.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed, std::initializer_list<std::uint64_t> stream = {});

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return next_u64(); }
  std::uint64_t next_u64();

  // Uniform on the open interval (0, 1).
  double uniform();
  double normal();
  // Gamma with shape k > 0 and scale theta.
  double gamma(double shape, double scale = 1.0);
  double chi_square(double dof) { return gamma(0.5 * dof, 2.0); }

 private:
  void refill();

  std::array<std::uint32_t, 2> key_{};
  std::uint64_t stream_ = 0;
  std::uint64_t block_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  int buffered_ = 0;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

}  // namespace voxelflow

#endif  // VOXELFLOW_RNG_HPP
