#include "voxelflow/cluster.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <tuple>

#include "voxelflow/error.hpp"

namespace voxelflow {

namespace {

constexpr std::array<std::array<int, 3>, 6> kAxisSteps{{{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}}};

}  // namespace

Neighborhood build_neighborhood(const Voxel& center, double radius, const Dims3& dims, const Mask3D& mask) {
  if (!(radius >= 0.0) || !std::isfinite(radius)) throw Error(Errc::InvalidParam, "radius must be finite and >= 0");
  if (!(mask.dims() == dims)) throw Error(Errc::DimensionMismatch, "mask dims differ from volume dims");
  if (!dims.contains(center) || !mask.contains(center)) {
    throw Error(Errc::CenterMasked, "center (" + std::to_string(center.i) + "," + std::to_string(center.j) + "," +
                                        std::to_string(center.k) + ") is not in the mask");
  }
  Neighborhood nb;
  nb.center = center;
  nb.radius = radius;
  nb.members.push_back(center);

  const double r2 = radius * radius;
  auto admit = [&](const Voxel& v) { return dims.contains(v) && mask.contains(v); };

  if (radius >= 1.0) {
    for (const auto& s : kAxisSteps) {
      const Voxel v{center.i + s[0], center.j + s[1], center.k + s[2]};
      if (admit(v)) nb.members.push_back(v);
    }
  }

  struct Candidate {
    int d2;
    Voxel v;
  };
  std::vector<Candidate> rest;
  const int reach = static_cast<int>(std::floor(radius));
  for (int dk = -reach; dk <= reach; ++dk) {
    for (int dj = -reach; dj <= reach; ++dj) {
      for (int di = -reach; di <= reach; ++di) {
        const int d2 = di * di + dj * dj + dk * dk;
        if (d2 <= 1 || static_cast<double>(d2) > r2 + 1e-12) continue;
        const Voxel v{center.i + di, center.j + dj, center.k + dk};
        if (admit(v)) rest.push_back({d2, v});
      }
    }
  }
  std::sort(rest.begin(), rest.end(), [](const Candidate& a, const Candidate& b) {
    return std::tie(a.d2, a.v.i, a.v.j, a.v.k) < std::tie(b.d2, b.v.i, b.v.j, b.v.k);
  });
  for (const auto& c : rest) nb.members.push_back(c.v);
  return nb;
}

Eigen::MatrixXd cluster_series(const Volume4D& vol, const Neighborhood& nb) {
  Eigen::MatrixXd block(nb.q(), vol.frames());
  for (int v = 0; v < nb.q(); ++v) {
    const auto s = vol.series_view(nb.members[v]);
    for (int t = 0; t < vol.frames(); ++t) block(v, t) = s[t];
  }
  return block;
}

}  // namespace voxelflow
