#ifndef VOXELFLOW_MDLM_HPP
#define VOXELFLOW_MDLM_HPP

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "voxelflow/design.hpp"
#include "voxelflow/distributions.hpp"

namespace voxelflow {

// Evolution G, discount delta (R_t = G C_{t-1} G' / delta) and the
// observational scale V. An empty evolution matrix means G = I.
struct ModelSpec {
  Eigen::MatrixXd evolution;
  double discount = 0.95;
  double obs_scale = 1.0;

  // Throws InvalidParam unless delta in (0.5, 1], V > 0 and G is finite p x p.
  void validate(int p) const;
};

struct PriorSpec {
  double c0 = 100.0;
  double s0 = 1.0;
  double n0 = 1.0;
};

// NIW posterior (Theta_t, Sigma | D_t) ~ NW^{-1}_{n_t}[m_t, C_t, S_t].
struct FilterState {
  int t = 0;
  double dof = 0.0;       // n_t
  Eigen::MatrixXd mean;   // m_t, p x q
  Eigen::MatrixXd left;   // C_t, p x p
  Eigen::MatrixXd right;  // S_t, q x q

  int p() const { return static_cast<int>(mean.rows()); }
  int q() const { return static_cast<int>(mean.cols()); }
};

struct StepDiagnostics {
  Eigen::MatrixXd prior_mean;        // a_t
  Eigen::MatrixXd prior_left;        // R_t
  Eigen::VectorXd forecast;          // f_t
  double forecast_scale = 0.0;       // Q_t
  Eigen::VectorXd gain;              // A_t
  Eigen::VectorXd error;             // e_t
};

// Full posterior trajectory; states[0] is the prior, states[t] the posterior after t observations.
struct FilterTrajectory {
  std::vector<FilterState> states;

  int frames() const { return static_cast<int>(states.size()) - 1; }
  const FilterState& final_state() const { return states.back(); }
};

struct PosteriorMarginal {
  MatrixTParams params;
  // n_t >= 30: the matrix-normal approximation is admissible.
  bool normal_approximation = false;
};

inline constexpr double kNormalApproxDof = 30.0;

// m_0 = 0, C_0 = c0 I_p, S_0 = s0 I_q, n_0 = n0. Throws InvalidParam.
FilterState init_prior(int p, int q, const PriorSpec& prior = {});

// One conjugate update. Throws DimensionMismatch on inconsistent sizes,
// InvalidParam on non-finite observations.
std::pair<FilterState, StepDiagnostics> filter_step(const FilterState& state, const Eigen::VectorXd& regressor,
                                                     const Eigen::VectorXd& observation, const ModelSpec& spec);

// series is q x T (row v = member v of the cluster).
FilterTrajectory filter_run(const Eigen::MatrixXd& series, const DesignMatrix& design, const ModelSpec& spec,
                            const PriorSpec& prior = {});

// Posterior means only, for t = first..T; avoids storing every C_t and S_t.
std::vector<Eigen::MatrixXd> filter_means(const Eigen::MatrixXd& series, const DesignMatrix& design,
                                          const ModelSpec& spec, const PriorSpec& prior, int first);

// T_{n_t}[m_t, C_t, S_t] for 1 <= t <= T; throws OutOfBounds otherwise.
PosteriorMarginal posterior_at(const FilterTrajectory& run, int t);

}  // namespace voxelflow

#endif  // VOXELFLOW_MDLM_HPP
