#ifndef VOXELFLOW_DISTRIBUTIONS_HPP
#define VOXELFLOW_DISTRIBUTIONS_HPP

#include <Eigen/Dense>

#include "voxelflow/rng.hpp"

namespace voxelflow {

struct MatrixNormalParams {
  Eigen::MatrixXd mean;       // p x q
  Eigen::MatrixXd left_cov;   // p x p
  Eigen::MatrixXd right_cov;  // q x q
};

// Matrix-T T_n[mean, left, right] in the West & Harrison convention:
// column v is marginally Student-t with n dof and scale left * right(v, v).
struct MatrixTParams {
  double dof = 0.0;
  Eigen::MatrixXd mean;
  Eigen::MatrixXd left;
  Eigen::MatrixXd right;
};

struct OrthantEstimate {
  double probability = 0.0;
  double standard_error = 0.0;
};

// Lower-triangular L with L L' = A + jitter * I. Jitter climbs 0, 1e-12,
// 1e-11, ..., 1e-6 and only when the previous rung fails. Rows/columns of
// A that are identically zero get a zero factor row. Throws NotPsd.
Eigen::MatrixXd chol_psd(const Eigen::MatrixXd& A);

// Throws InvalidParam for non-square or asymmetric input.
void check_symmetric(const Eigen::MatrixXd& A, const char* what);

Eigen::MatrixXd sample_matrix_normal(const MatrixNormalParams& params, Rng& rng);

// Standard inverse Wishart IW(dof, scale): E = scale / (dof - q - 1).
// Bartlett factor of W(dof, I), mapped through chol(scale).
// Throws DofTooSmall when dof <= q - 1.
Eigen::MatrixXd sample_inverse_wishart(double dof, const Eigen::MatrixXd& scale, Rng& rng);

// Composition draw: Sigma ~ IW(n + q - 1, n * right), then
// X | Sigma ~ MN(mean, left, Sigma).
Eigen::MatrixXd sample_matrix_t(const MatrixTParams& params, Rng& rng);

// Draws `draws` vectors from N(mean, cov) into columns of the result.
Eigen::MatrixXd sample_mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, int draws, Rng& rng);

// Monte Carlo estimate of P(all components > 0) under N(mean, cov).
OrthantEstimate mvn_orthant_mc(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, int draws, Rng& rng);

double normal_cdf(double x);
// Upper tail 1 - Phi(x) without cancellation.
double normal_sf(double x);
// CDF of F(d1, d2). Throws InvalidParam for nonpositive dof or x < 0.
double f_cdf(double x, double d1, double d2);
// Upper tail 1 - f_cdf, computed directly.
double f_sf(double x, double d1, double d2);

// Inverse gamma (density proportional to x^(-shape-1) exp(-scale/x))
// restricted to [lo, hi] by CDF inversion. `hi` may be +infinity when
// shape > 0. On a finite box the shape may be <= 0 and the scale may be 0;
// the truncated density is still proper there.
// Throws InvalidParam, or EmptyTruncation when the box holds < 1e-300 mass.
double sample_truncated_inv_gamma(double shape, double scale, double lo, double hi, Rng& rng);

// P(lo <= X <= x) / P(lo <= X <= hi) for the truncated law above.
double truncated_inv_gamma_cdf(double x, double shape, double scale, double lo, double hi);

// Draw from N(mean, sd^2) restricted to [lo, hi].
double sample_truncated_normal(double mean, double sd, double lo, double hi, Rng& rng);

}  // namespace voxelflow

#endif  // VOXELFLOW_DISTRIBUTIONS_HPP
