#ifndef VOXELFLOW_TESTS_FIXTURES_HPP
#define VOXELFLOW_TESTS_FIXTURES_HPP

#include <Eigen/Dense>
#include <vector>

#include "voxelflow/design.hpp"
#include "voxelflow/mdlm.hpp"
#include "voxelflow/rng.hpp"
#include "voxelflow/volume.hpp"

namespace fixture {

// Hand-built posterior state; dof defaults to something past the
// normal-approximation threshold.
inline voxelflow::FilterState state(const Eigen::MatrixXd& mean, const Eigen::MatrixXd& left,
                                    const Eigen::MatrixXd& right, double dof = 100.0) {
  voxelflow::FilterState s;
  s.t = static_cast<int>(dof) - 1;
  s.dof = dof;
  s.mean = mean;
  s.left = left;
  s.right = right;
  return s;
}

// 30 s on / 30 s off blocks at TR 2 convolved with the default HRF.
inline std::vector<double> block_regressor(int frames, double tr = 2.0) {
  using namespace voxelflow;
  return normalize_max_abs(convolve(block_stimulus(frames, tr, 30.0, 30.0), hrf_double_gamma(tr)));
}

inline voxelflow::Volume4D noise_volume(voxelflow::Dims3 d, int frames, std::uint64_t seed, double sd = 1.0) {
  voxelflow::Rng rng(seed);
  std::vector<double> data(d.count() * frames);
  for (double& v : data) v = sd * rng.normal();
  return voxelflow::Volume4D(d, frames, std::move(data), 2.0);
}

}  // namespace fixture

#endif  // VOXELFLOW_TESTS_FIXTURES_HPP
