#include "voxelflow/distributions.hpp"

#include <algorithm>
#include <array>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "voxelflow/error.hpp"

namespace voxelflow {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void validate_psd_input(const Eigen::MatrixXd& A, const char* what) {
  check_symmetric(A, what);
  if (!A.allFinite()) throw Error(Errc::InvalidParam, std::string(what) + " has non-finite entries");
}

// Sigma = K K' with Sigma ~ IW(dof, scale); returns K.
Eigen::MatrixXd inverse_wishart_factor(double dof, const Eigen::MatrixXd& scale, Rng& rng) {
  const auto q = scale.rows();
  if (!(dof > static_cast<double>(q) - 1.0) || !std::isfinite(dof)) {
    throw Error(Errc::DofTooSmall, "inverse Wishart needs dof > q - 1");
  }
  const Eigen::MatrixXd M = chol_psd(scale);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(q, q);
  for (Eigen::Index i = 0; i < q; ++i) {
    A(i, i) = std::sqrt(rng.chi_square(dof - static_cast<double>(i)));
    for (Eigen::Index j = 0; j < i; ++j) A(i, j) = rng.normal();
  }
  // W = A A' ~ W(dof, I); Sigma = M (A A')^{-1} M' = (M A^{-T})(M A^{-T})'.
  const Eigen::MatrixXd Kt = A.triangularView<Eigen::Lower>().solve(M.transpose());
  return Kt.transpose();
}

Eigen::MatrixXd standard_normal_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Eigen::MatrixXd Z(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) Z(r, c) = rng.normal();
  }
  return Z;
}

double normal_quantile(double p) { return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p); }
double normal_upper_quantile(double q) { return std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * q); }

// Truncated inverse gamma through Y = scale / X ~ Gamma(shape, 1).
struct GammaTail {
  bool use_upper = false;  // work with Q(a, y) instead of P(a, y)
  double from = 0.0;
  double to = 0.0;
};

GammaTail gamma_window(double shape, double y_lo, double y_hi) {
  const double p_lo = y_lo > 0.0 ? boost::math::gamma_p(shape, y_lo) : 0.0;
  if (p_lo > 0.5) {
    const double q_lo = boost::math::gamma_q(shape, y_lo);
    const double q_hi = std::isfinite(y_hi) ? boost::math::gamma_q(shape, y_hi) : 0.0;
    return {true, q_hi, q_lo};
  }
  const double p_hi = std::isfinite(y_hi) ? boost::math::gamma_p(shape, y_hi) : 1.0;
  return {false, p_lo, p_hi};
}

// P(y_lo <= Y <= y_hi) for Y ~ Gamma(shape, 1), differenced in the tail
// with less cancellation.
double gamma_mass(double shape, double y_lo, double y_hi) {
  const GammaTail w = gamma_window(shape, y_lo, y_hi);
  return w.to - w.from;
}

// Log-space numeric route for shape <= 0: u = log x has log-density
// -shape * u - scale * exp(-u), which is concave.
class LogSpaceInvGamma {
 public:
  LogSpaceInvGamma(double shape, double scale, double lo, double hi) : shape_(shape), scale_(scale) {
    u_hi_ = std::log(hi);
    u_lo_ = lo > 0.0 ? std::log(lo) : std::log(scale) - std::log(800.0);
    if (!(u_lo_ < u_hi_)) u_lo_ = u_hi_ - 1e-300;
    peak_ = std::max(log_density(u_lo_), log_density(u_hi_));
    nodes_.resize(kPieces + 1);
    cumulative_.assign(kPieces + 1, 0.0);
    for (int n = 0; n <= kPieces; ++n) nodes_[n] = u_lo_ + (u_hi_ - u_lo_) * n / kPieces;
    for (int n = 0; n < kPieces; ++n) cumulative_[n + 1] = cumulative_[n] + integral(nodes_[n], nodes_[n + 1]);
  }

  double total() const { return cumulative_.back(); }
  double peak_log() const { return peak_; }

  double cdf_unnormalized(double u) const {
    if (u <= u_lo_) return 0.0;
    if (u >= u_hi_) return total();
    const auto it = std::upper_bound(nodes_.begin(), nodes_.end(), u);
    const auto n = static_cast<std::size_t>(std::distance(nodes_.begin(), it) - 1);
    return cumulative_[n] + integral(nodes_[n], u);
  }

  double quantile(double fraction) const {
    const double target = fraction * total();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
    auto n = static_cast<std::size_t>(std::distance(cumulative_.begin(), it));
    n = std::clamp<std::size_t>(n, 1, kPieces) - 1;
    double a = nodes_[n];
    double b = nodes_[n + 1];
    const double need = target - cumulative_[n];
    double u = 0.5 * (a + b);
    for (int iter = 0; iter < 100; ++iter) {
      const double f = integral(nodes_[n], u) - need;
      if (f > 0.0) b = u; else a = u;
      const double dens = density(u);
      double next = dens > 0.0 ? u - f / dens : 0.5 * (a + b);
      if (!(next > a && next < b)) next = 0.5 * (a + b);
      if (std::abs(next - u) <= 1e-15 * (1.0 + std::abs(u)) || b - a <= 1e-15 * (1.0 + std::abs(u))) {
        u = next;
        break;
      }
      u = next;
    }
    return u;
  }

 private:
  static constexpr int kPieces = 64;

  double log_density(double u) const { return -shape_ * u - scale_ * std::exp(-u); }
  double density(double u) const { return std::exp(log_density(u) - peak_); }
  double integral(double a, double b) const {
    if (b <= a) return 0.0;
    return boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
        [this](double u) { return density(u); }, a, b, 0);
  }

  double shape_;
  double scale_;
  double u_lo_ = 0.0;
  double u_hi_ = 0.0;
  double peak_ = 0.0;
  std::vector<double> nodes_;
  std::vector<double> cumulative_;
};

void validate_truncation(double shape, double scale, double lo, double hi) {
  if (!std::isfinite(shape) || !(scale >= 0.0) || !std::isfinite(scale) || !(lo >= 0.0) || !(hi > lo)) {
    throw Error(Errc::InvalidParam, "truncated inverse gamma needs finite shape, scale >= 0, 0 <= lo < hi");
  }
  if (!std::isfinite(hi) && !(shape > 0.0 && scale > 0.0)) {
    throw Error(Errc::InvalidParam, "unbounded truncation needs shape > 0 and scale > 0");
  }
}

}  // namespace

void check_symmetric(const Eigen::MatrixXd& A, const char* what) {
  if (A.rows() != A.cols()) throw Error(Errc::InvalidParam, std::string(what) + " is not square");
  const double tol = 1e-10 * std::max(1.0, A.cwiseAbs().maxCoeff());
  if (((A - A.transpose()).cwiseAbs().array() > tol).any()) {
    throw Error(Errc::InvalidParam, std::string(what) + " is not symmetric");
  }
}

Eigen::MatrixXd chol_psd(const Eigen::MatrixXd& A) {
  validate_psd_input(A, "matrix");
  const auto n = A.rows();
  std::vector<Eigen::Index> active;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(A.row(i).array() == 0.0).all()) active.push_back(i);
  }
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
  if (active.empty()) return L;

  const auto m = static_cast<Eigen::Index>(active.size());
  Eigen::MatrixXd sub(m, m);
  for (Eigen::Index r = 0; r < m; ++r) {
    for (Eigen::Index c = 0; c < m; ++c) sub(r, c) = 0.5 * (A(active[r], active[c]) + A(active[c], active[r]));
  }
  constexpr std::array<double, 8> kLadder = {0.0, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6};
  for (double jitter : kLadder) {
    Eigen::MatrixXd trial = sub;
    trial.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(trial);
    if (llt.info() != Eigen::Success) continue;
    const Eigen::MatrixXd factor = llt.matrixL();
    if (!factor.allFinite() || (factor.diagonal().array() <= 0.0).any()) continue;
    for (Eigen::Index r = 0; r < m; ++r) {
      for (Eigen::Index c = 0; c <= r; ++c) L(active[r], active[c]) = factor(r, c);
    }
    return L;
  }
  throw Error(Errc::NotPsd, "Cholesky failed with jitter up to 1e-6");
}

Eigen::MatrixXd sample_matrix_normal(const MatrixNormalParams& params, Rng& rng) {
  const auto p = params.mean.rows();
  const auto q = params.mean.cols();
  if (params.left_cov.rows() != p || params.right_cov.rows() != q) {
    throw Error(Errc::DimensionMismatch, "matrix normal covariance dims do not match mean");
  }
  const Eigen::MatrixXd L = chol_psd(params.left_cov);
  const Eigen::MatrixXd R = chol_psd(params.right_cov);
  return params.mean + L * standard_normal_matrix(p, q, rng) * R.transpose();
}

Eigen::MatrixXd sample_inverse_wishart(double dof, const Eigen::MatrixXd& scale, Rng& rng) {
  validate_psd_input(scale, "inverse Wishart scale");
  const Eigen::MatrixXd K = inverse_wishart_factor(dof, scale, rng);
  Eigen::MatrixXd sigma = K * K.transpose();
  return 0.5 * (sigma + sigma.transpose());
}

Eigen::MatrixXd sample_matrix_t(const MatrixTParams& params, Rng& rng) {
  const auto p = params.mean.rows();
  const auto q = params.mean.cols();
  if (!(params.dof > 0.0) || !std::isfinite(params.dof)) throw Error(Errc::InvalidParam, "matrix-T dof must be positive");
  if (params.left.rows() != p || params.right.rows() != q) {
    throw Error(Errc::DimensionMismatch, "matrix-T scale dims do not match mean");
  }
  validate_psd_input(params.right, "matrix-T right scale");
  const Eigen::MatrixXd K =
      inverse_wishart_factor(params.dof + static_cast<double>(q) - 1.0, params.dof * params.right, rng);
  const Eigen::MatrixXd L = chol_psd(params.left);
  return params.mean + L * standard_normal_matrix(p, q, rng) * K.transpose();
}

Eigen::MatrixXd sample_mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, int draws, Rng& rng) {
  if (cov.rows() != mean.size()) throw Error(Errc::DimensionMismatch, "mvn covariance dims");
  if (draws < 1) throw Error(Errc::InvalidParam, "draws must be >= 1");
  const Eigen::MatrixXd L = chol_psd(cov);
  Eigen::MatrixXd out = L * standard_normal_matrix(mean.size(), draws, rng);
  out.colwise() += mean;
  return out;
}

OrthantEstimate mvn_orthant_mc(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, int draws, Rng& rng) {
  if (cov.rows() != mean.size()) throw Error(Errc::DimensionMismatch, "mvn covariance dims");
  if (draws < 1) throw Error(Errc::InvalidParam, "draws must be >= 1");
  const Eigen::MatrixXd L = chol_psd(cov);
  const auto q = mean.size();
  Eigen::VectorXd eps(q);
  long hits = 0;
  for (int n = 0; n < draws; ++n) {
    for (Eigen::Index c = 0; c < q; ++c) eps(c) = rng.normal();
    const Eigen::VectorXd z = mean + L * eps;
    hits += (z.array() > 0.0).all() ? 1 : 0;
  }
  OrthantEstimate est;
  est.probability = static_cast<double>(hits) / draws;
  est.standard_error = std::sqrt(est.probability * (1.0 - est.probability) / draws);
  return est;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_sf(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

double f_sf(double x, double d1, double d2) {
  if (!(d1 > 0.0) || !(d2 > 0.0) || !(x >= 0.0)) throw Error(Errc::InvalidParam, "f_sf needs d1, d2 > 0 and x >= 0");
  if (x == 0.0) return 1.0;
  if (!std::isfinite(x)) return 0.0;
  return boost::math::ibetac(0.5 * d1, 0.5 * d2, d1 * x / (d1 * x + d2));
}

double f_cdf(double x, double d1, double d2) {
  if (!(d1 > 0.0) || !(d2 > 0.0) || !(x >= 0.0)) throw Error(Errc::InvalidParam, "f_cdf needs d1, d2 > 0 and x >= 0");
  if (x == 0.0) return 0.0;
  if (!std::isfinite(x)) return 1.0;
  return boost::math::ibeta(0.5 * d1, 0.5 * d2, d1 * x / (d1 * x + d2));
}

double truncated_inv_gamma_cdf(double x, double shape, double scale, double lo, double hi) {
  validate_truncation(shape, scale, lo, hi);
  if (x <= lo) return 0.0;
  if (x >= hi) return 1.0;
  if (shape > 0.0 && scale > 0.0) {
    // X in [lo, x] <=> Y = scale / X in [scale / x, scale / lo].
    const double y_top = lo > 0.0 ? scale / lo : kInf;
    return std::clamp(gamma_mass(shape, scale / x, y_top) / gamma_mass(shape, scale / hi, y_top), 0.0, 1.0);
  }
  if (scale == 0.0) {
    if (shape == 0.0) return std::log(x / lo) / std::log(hi / lo);
    const double a = -shape;
    return (std::pow(x, a) - std::pow(lo, a)) / (std::pow(hi, a) - std::pow(lo, a));
  }
  const LogSpaceInvGamma dist(shape, scale, lo, hi);
  return dist.cdf_unnormalized(std::log(x)) / dist.total();
}

double sample_truncated_inv_gamma(double shape, double scale, double lo, double hi, Rng& rng) {
  validate_truncation(shape, scale, lo, hi);
  const double u = rng.uniform();
  double x = 0.0;
  if (shape > 0.0 && scale > 0.0) {
    const double y_lo = std::isfinite(hi) ? scale / hi : 0.0;
    const double y_hi = lo > 0.0 ? scale / lo : kInf;
    const GammaTail w = gamma_window(shape, y_lo, y_hi);
    const double mass = w.to - w.from;
    if (!(mass >= 1e-300)) throw Error(Errc::EmptyTruncation, "inverse gamma has no mass in the box");
    const double target = w.from + u * mass;
    const double y = w.use_upper ? boost::math::gamma_q_inv(shape, target) : boost::math::gamma_p_inv(shape, target);
    x = scale / y;
  } else if (scale == 0.0) {
    if (lo == 0.0 && shape >= 0.0) throw Error(Errc::EmptyTruncation, "power law is not integrable at 0");
    if (shape == 0.0) {
      x = lo * std::exp(u * std::log(hi / lo));
    } else {
      const double a = -shape;
      x = std::pow(std::pow(lo, a) + u * (std::pow(hi, a) - std::pow(lo, a)), 1.0 / a);
    }
  } else {
    const LogSpaceInvGamma dist(shape, scale, lo, hi);
    if (!(dist.total() > 0.0) || dist.peak_log() < -700.0) {
      throw Error(Errc::EmptyTruncation, "inverse gamma has no mass in the box");
    }
    x = std::exp(dist.quantile(u));
  }
  return std::clamp(x, lo, hi);
}

double sample_truncated_normal(double mean, double sd, double lo, double hi, Rng& rng) {
  if (!(sd > 0.0) || !(hi > lo)) throw Error(Errc::InvalidParam, "truncated normal needs sd > 0 and lo < hi");
  const double a = (lo - mean) / sd;
  const double b = (hi - mean) / sd;
  const double mass = normal_cdf(b) - normal_cdf(a);
  if (mass > 0.1) {
    // Plain rejection while acceptance is reasonable.
    for (int attempt = 0; attempt < 1000; ++attempt) {
      const double z = mean + sd * rng.normal();
      if (z >= lo && z <= hi) return z;
    }
  }
  const double u = rng.uniform();
  double z = 0.0;
  if (a > 0.0) {
    const double qa = normal_sf(a);
    const double qb = normal_sf(b);
    if (!(qa - qb > 0.0)) return lo;
    const double target = qa - u * (qa - qb);
    if (!(target > 0.0)) return hi;
    if (!(target < 1.0)) return lo;
    z = normal_upper_quantile(target);
  } else {
    const double pa = normal_cdf(a);
    const double pb = normal_cdf(b);
    if (!(pb - pa > 0.0)) return b < 0.0 ? hi : lo;
    const double target = pa + u * (pb - pa);
    if (!(target > 0.0)) return lo;
    if (!(target < 1.0)) return hi;
    z = normal_quantile(target);
  }
  return std::clamp(mean + sd * z, lo, hi);
}

}  // namespace voxelflow
