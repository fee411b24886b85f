#ifndef VOXELFLOW_CLUSTER_HPP
#define VOXELFLOW_CLUSTER_HPP

#include <Eigen/Dense>
#include <vector>

#include "voxelflow/volume.hpp"

namespace voxelflow {

// Euclidean ball of in-volume, in-mask voxels around a center.
// members[0] is the center, then the axis neighbors in the order
// +i, -i, +j, -j, +k, -k, then the rest by (distance, i, j, k).
struct Neighborhood {
  Voxel center;
  std::vector<Voxel> members;
  double radius = 1.0;

  int q() const { return static_cast<int>(members.size()); }
};

// Throws CenterMasked when the center is outside the volume or the mask,
// InvalidParam for a negative radius.
Neighborhood build_neighborhood(const Voxel& center, double radius, const Dims3& dims, const Mask3D& mask);

// q x T block; row v is the series of members[v].
Eigen::MatrixXd cluster_series(const Volume4D& vol, const Neighborhood& nb);

}  // namespace voxelflow

#endif  // VOXELFLOW_CLUSTER_HPP
