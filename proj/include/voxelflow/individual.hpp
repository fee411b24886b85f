#ifndef VOXELFLOW_INDIVIDUAL_HPP
#define VOXELFLOW_INDIVIDUAL_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "voxelflow/cluster.hpp"
#include "voxelflow/mdlm.hpp"
#include "voxelflow/rng.hpp"
#include "voxelflow/volume.hpp"

namespace voxelflow {

enum class TestMode { Marginal, Joint, Average, SharpF, Trajectory };

// Which scalar or vector of the posterior a test looks at.
enum class SummaryMode { Marginal, Joint, Average };

enum class EvidenceRule {
  AllTimes,  // the whole window must satisfy the predicate
  PerTime,   // mean over t of the per-t fraction
};

std::string_view to_string(TestMode mode);
std::string_view to_string(SummaryMode mode);
std::string_view to_string(EvidenceRule rule);
// Throws InvalidParam on an unknown name.
TestMode parse_test_mode(std::string_view name);
SummaryMode parse_summary_mode(std::string_view name);
EvidenceRule parse_evidence_rule(std::string_view name);

struct TestResult {
  TestMode mode = TestMode::Marginal;
  double probability = 0.0;
  std::optional<double> mc_se;
  double mean_summary = 0.0;  // m*, min or mean of the row, or the F statistic
  double var_summary = 0.0;
  int coef = 0;
  int t_start = 0;
  int t_end = 0;
};

// Normal approximation of one coefficient row at time T. Scalar modes have
// a length-1 mean; the joint mode carries the whole row and C_ll * S_T.
struct PosteriorSummary {
  SummaryMode mode = SummaryMode::Marginal;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  int coef = 0;
  int t = 0;
};

// Throws DofTooSmall (n_T < 30), IndexOutOfRange, NotPsd (average mode, 1'S1 <= 0).
PosteriorSummary summarize(const FilterState& state, int coef, SummaryMode mode);

// P(all components > 0): closed form in one dimension, orthant MC otherwise.
TestResult summary_probability(const PosteriorSummary& summary, int draws, Rng& rng);

TestResult test_marginal(const FilterState& state, int coef);
TestResult test_joint(const FilterState& state, int coef, int draws, Rng& rng);
TestResult test_average(const FilterState& state, int coef);

// Pr[F(k, n_t) >= k^-1 m' (C_sub S_cc)^-1 m] for the coefficient subset of
// column `column`. Throws Singular, IndexOutOfRange, InvalidParam (empty subset).
TestResult sharp_f_evidence(const FilterState& state, std::span<const int> subset, int column = 0);

struct TrajectoryDraws {
  int window_start = 30;
  Eigen::MatrixXd values;  // N x (T - window_start + 1)

  int replicates() const { return static_cast<int>(values.rows()); }
};

// Posterior-predictive replicate curves: draw Sigma and each Theta_t, simulate
// data, refilter and record the summary of the refit means for t = window_start..T.
TrajectoryDraws simulate_trajectories(const FilterTrajectory& run, const DesignMatrix& design, const ModelSpec& spec,
                                      const PriorSpec& prior, SummaryMode mode, int coef, int window_start,
                                      int replicates, Rng& rng);

// Fraction of replicates with theta_t > threshold over the window.
TestResult evidence_from_trajectories(const TrajectoryDraws& draws, EvidenceRule rule = EvidenceRule::AllTimes,
                                      double threshold = 0.0);

struct TestConfig {
  TestMode mode = TestMode::Marginal;
  SummaryMode trajectory_summary = SummaryMode::Marginal;
  EvidenceRule rule = EvidenceRule::AllTimes;
  int coef = 0;
  double radius = 1.0;
  int min_cluster = 1;
  int warmup = 30;
  int trajectory_draws = 100;
  int joint_draws = 10000;
  std::vector<int> sharp_subset{0};
  std::uint64_t seed = 1;
  int threads = 0;
};

struct VoxelFailure {
  std::size_t index = 0;
  std::string message;
};

// One value per voxel; NaN where no probability was produced.
struct EvidenceMap {
  Dims3 dims;
  std::vector<double> values;
  std::size_t processed = 0;
  std::vector<VoxelFailure> failures;  // sorted by index

  Volume4D to_volume(double time_step = 0.0) const;
  double at(const Voxel& v) const { return values[dims.index(v)]; }
};

// Restricts evaluation to these voxels (all in-mask voxels when empty).
struct VoxelSelection {
  std::vector<Voxel> voxels;
};

EvidenceMap run_individual(const Volume4D& bold, const Mask3D& mask, const DesignMatrix& design, const ModelSpec& spec,
                           const PriorSpec& prior, const TestConfig& config, const VoxelSelection& selection = {});

}  // namespace voxelflow

#endif  // VOXELFLOW_INDIVIDUAL_HPP
