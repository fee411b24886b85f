#ifndef VOXELFLOW_SIMULATE_HPP
#define VOXELFLOW_SIMULATE_HPP

#include <cstdint>
#include <optional>
#include <vector>

#include "voxelflow/group.hpp"
#include "voxelflow/individual.hpp"
#include "voxelflow/volume.hpp"

namespace voxelflow {

enum class NoiseModel { White, Ar1 };

// Inclusive voxel box.
struct VoxelBox {
  Voxel lo;
  Voxel hi;
  bool contains(const Voxel& v) const {
    return v.i >= lo.i && v.i <= hi.i && v.j >= lo.j && v.j <= hi.j && v.k >= lo.k && v.k <= hi.k;
  }
};

struct SimSpec {
  Dims3 dims{16, 16, 16};
  int frames = 120;
  double tr = 2.0;
  NoiseModel noise = NoiseModel::White;
  double rho = 0.0;
  double sd = 1.0;
  double baseline = 0.0;
  std::optional<VoxelBox> signal_box;
  double amplitude = 0.0;          // multiplies the regressor inside the box
  std::vector<double> regressor;   // x_t, length `frames` when a signal is embedded
  std::uint64_t seed = 1;
  std::uint64_t subject = 0;       // extra stream word, one per simulated subject
};

struct SimResult {
  Volume4D bold;
  Mask3D truth;  // voxels that received signal
};

// Per voxel: white or stationary AR(1) noise with marginal sd, plus
// amplitude * x_t inside the box. Noise streams do not depend on the signal.
SimResult simulate(const SimSpec& spec);

struct FprEntry {
  TestMode mode = TestMode::Marginal;
  std::size_t declared = 0;
  std::size_t evaluated = 0;
  std::size_t failures = 0;
  double fpr = 0.0;
};

struct FprReport {
  std::size_t total = 0;
  double cutoff = 0.95;
  std::vector<FprEntry> individual;
  std::vector<FprEntry> group;  // empty unless group subjects were simulated
  int group_subjects = 0;
};

struct ValidationConfig {
  std::vector<TestMode> modes{TestMode::Marginal, TestMode::Joint, TestMode::Average};
  TestConfig test;  // mode field is overwritten per entry
  double cutoff = 0.95;
  int group_subjects = 0;
};

// Simulates the null spec (amplitude forced to 0), runs every mode and counts
// probabilities above the cutoff over all in-mask voxels.
FprReport validate_fpr(const SimSpec& null_spec, const DesignMatrix& design, const ModelSpec& model,
                       const PriorSpec& prior, const ValidationConfig& config);

}  // namespace voxelflow

#endif  // VOXELFLOW_SIMULATE_HPP
