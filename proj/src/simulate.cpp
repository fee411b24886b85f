#include "voxelflow/simulate.hpp"

#include <cmath>
#include <string>

#include "voxelflow/error.hpp"
#include "voxelflow/rng.hpp"

namespace voxelflow {

namespace {

FprEntry count_declared(const EvidenceMap& map, TestMode mode, double cutoff, std::size_t total) {
  FprEntry e;
  e.mode = mode;
  e.evaluated = map.processed - map.failures.size();
  e.failures = map.failures.size();
  for (double v : map.values) {
    if (!std::isnan(v) && v > cutoff) ++e.declared;
  }
  e.fpr = total > 0 ? static_cast<double>(e.declared) / static_cast<double>(total) : 0.0;
  return e;
}

}  // namespace

SimResult simulate(const SimSpec& spec) {
  if (spec.dims.d1 <= 0 || spec.dims.d2 <= 0 || spec.dims.d3 <= 0 || spec.frames <= 0) {
    throw Error(Errc::InvalidParam, "simulation dims must be positive");
  }
  if (!(spec.sd > 0.0)) throw Error(Errc::InvalidParam, "noise sd must be positive");
  if (spec.noise == NoiseModel::Ar1 && !(spec.rho > -1.0 && spec.rho < 1.0)) {
    throw Error(Errc::InvalidParam, "AR(1) coefficient must lie in (-1, 1)");
  }
  if (!(spec.tr > 0.0)) throw Error(Errc::InvalidParam, "TR must be positive");
  const bool signal = spec.signal_box.has_value() && spec.amplitude != 0.0;
  if (signal && static_cast<int>(spec.regressor.size()) != spec.frames) {
    throw Error(Errc::DimensionMismatch, "signal regressor length differs from frame count");
  }

  const std::size_t voxels = spec.dims.count();
  const int T = spec.frames;
  std::vector<double> data(voxels * static_cast<std::size_t>(T));
  std::vector<bool> truth(voxels, false);
  const double rho = spec.noise == NoiseModel::Ar1 ? spec.rho : 0.0;
  const double innov = spec.sd * std::sqrt(1.0 - rho * rho);
  for (std::size_t idx = 0; idx < voxels; ++idx) {
    Rng rng(spec.seed, {idx, spec.subject});
    double* y = data.data() + idx * T;
    double e = spec.sd * rng.normal();
    y[0] = e;
    for (int t = 1; t < T; ++t) {
      e = spec.noise == NoiseModel::Ar1 ? rho * e + innov * rng.normal() : spec.sd * rng.normal();
      y[t] = e;
    }
    for (int t = 0; t < T; ++t) y[t] += spec.baseline;
    if (spec.signal_box && spec.signal_box->contains(spec.dims.voxel(idx))) {
      truth[idx] = true;
      if (signal) {
        for (int t = 0; t < T; ++t) y[t] += spec.amplitude * spec.regressor[t];
      }
    }
  }
  return SimResult{Volume4D(spec.dims, T, std::move(data), spec.tr), Mask3D(spec.dims, std::move(truth))};
}

FprReport validate_fpr(const SimSpec& null_spec, const DesignMatrix& design, const ModelSpec& model,
                       const PriorSpec& prior, const ValidationConfig& config) {
  if (!(config.cutoff >= 0.0 && config.cutoff <= 1.0)) throw Error(Errc::InvalidParam, "cutoff must lie in [0, 1]");
  SimSpec spec = null_spec;
  spec.amplitude = 0.0;
  const SimResult sim = simulate(spec);
  const Mask3D mask = Mask3D::full(spec.dims);

  FprReport report;
  report.total = mask.count();
  report.cutoff = config.cutoff;
  report.group_subjects = config.group_subjects;
  for (TestMode mode : config.modes) {
    TestConfig tc = config.test;
    tc.mode = mode;
    const EvidenceMap map = run_individual(sim.bold, mask, design, model, prior, tc);
    report.individual.push_back(count_declared(map, mode, config.cutoff, report.total));
  }
  if (config.group_subjects > 0) {
    std::vector<Subject> subjects;
    for (int s = 0; s < config.group_subjects; ++s) {
      SimSpec ss = spec;
      ss.subject = static_cast<std::uint64_t>(s) + 1;
      subjects.push_back({"sim" + std::to_string(s), "A", simulate(ss).bold});
    }
    for (TestMode mode : config.modes) {
      if (mode == TestMode::SharpF) continue;
      GroupRunConfig gc;
      gc.test = config.test;
      gc.test.mode = mode;
      const EvidenceMap map = run_group(subjects, mask, design, model, prior, gc);
      report.group.push_back(count_declared(map, mode, config.cutoff, report.total));
    }
  }
  return report;
}

}  // namespace voxelflow
