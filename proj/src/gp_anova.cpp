#include "voxelflow/gp_anova.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "voxelflow/distributions.hpp"
#include "voxelflow/error.hpp"

namespace voxelflow {

namespace {

struct Corr {
  Eigen::MatrixXd L;
  double logdet = 0.0;

  Corr(const std::vector<double>& grid, double tau, double jitter) {
    L = chol_psd(build_corr(grid, tau, jitter));
    logdet = 2.0 * L.diagonal().array().log().sum();
  }
  // x' R^-1 x
  double quad(const Eigen::VectorXd& x) const {
    return L.triangularView<Eigen::Lower>().solve(x).squaredNorm();
  }
  Eigen::MatrixXd inverse() const {
    const auto n = L.rows();
    Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
    const Eigen::MatrixXd Linv = L.triangularView<Eigen::Lower>().solve(I);
    return Linv.transpose() * Linv;
  }
};

// Draw from N(P^-1 b, P^-1).
Eigen::VectorXd draw_canonical(const Eigen::MatrixXd& precision, const Eigen::VectorXd& linear, Rng& rng) {
  const Eigen::MatrixXd sym = 0.5 * (precision + precision.transpose());
  Eigen::LLT<Eigen::MatrixXd> llt(sym);
  if (llt.info() != Eigen::Success) throw Error(Errc::NotPsd, "conditional precision is not positive definite");
  const Eigen::VectorXd mean = llt.solve(linear);
  Eigen::VectorXd z(mean.size());
  for (Eigen::Index n = 0; n < z.size(); ++n) z(n) = rng.normal();
  return mean + llt.matrixU().solve(z);
}

double residual_quad(const CurveBatch& batch, const Eigen::VectorXd& centre, const Corr& r) {
  double total = 0.0;
  for (int i = 0; i < batch.count(); ++i) total += r.quad(batch.curves.row(i).transpose() - centre);
  return total;
}

double d0(const GpAnovaState& s, const CurveBatch& a, const CurveBatch& b, const Corr& r) {
  return residual_quad(a, s.mu + s.alpha_a, r) + residual_quad(b, s.mu + s.alpha_b, r);
}

double d1(const GpAnovaState& s, const Corr& r) {
  return r.quad(s.mu - Eigen::VectorXd::Constant(s.mu.size(), s.phi));
}

double d2(const GpAnovaState& s, const Corr& r) { return r.quad(s.alpha_a); }

double draw_variance(const char* block, double shape, double scale, const Box& box, Rng& rng) {
  try {
    return sample_truncated_inv_gamma(shape, scale, box.lo, box.hi, rng);
  } catch (const Error& e) {
    throw Error(e.code(), std::string(block) + ": " + e.what());
  }
}

void check_batches(const CurveBatch& a, const CurveBatch& b) {
  if (a.count() < 1 || b.count() < 1) throw Error(Errc::EmptyGroup, "each batch needs at least one curve");
  if (a.points() != b.points() || a.points() < 1) throw Error(Errc::InconsistentDims, "batches differ in curve length");
  if (static_cast<int>(a.grid.size()) != a.points() || static_cast<int>(b.grid.size()) != b.points()) {
    throw Error(Errc::InconsistentDims, "time grid length differs from curve length");
  }
  if (!a.curves.allFinite() || !b.curves.allFinite()) throw Error(Errc::InvalidParam, "curves must be finite");
}

}  // namespace

std::string_view to_string(ConditionalVariant v) { return v == ConditionalVariant::AsPrinted ? "as-printed" : "derived"; }

ConditionalVariant parse_variant(std::string_view name) {
  if (name == "as-printed") return ConditionalVariant::AsPrinted;
  if (name == "derived") return ConditionalVariant::Derived;
  throw Error(Errc::InvalidParam, "unknown conditional variant '" + std::string(name) + "'");
}

CurveBatch read_curves_csv(const std::filesystem::path& path, const std::string& group) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoFailure, "cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    std::vector<double> row;
    std::string tok;
    while (ss >> tok) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw Error(Errc::InvalidParam, path.string() + ": non-numeric value '" + tok + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw Error(Errc::InconsistentDims, path.string() + ": curves differ in length");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty() || rows.front().empty()) throw Error(Errc::EmptyGroup, path.string() + ": no curves");
  CurveBatch batch;
  batch.group = group;
  batch.curves.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t t = 0; t < rows[i].size(); ++t) batch.curves(i, t) = rows[i][t];
  }
  batch.grid.resize(rows.front().size());
  for (std::size_t t = 0; t < batch.grid.size(); ++t) batch.grid[t] = static_cast<double>(t);
  return batch;
}

Eigen::MatrixXd build_corr(const std::vector<double>& grid, double tau, double jitter) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw Error(Errc::InvalidParam, "tau must be positive");
  const auto p = static_cast<Eigen::Index>(grid.size());
  Eigen::MatrixXd R(p, p);
  for (Eigen::Index s = 0; s < p; ++s) {
    for (Eigen::Index t = 0; t < p; ++t) {
      const double u = (grid[s] - grid[t]) / tau;
      R(s, t) = std::exp(-u * u);
    }
  }
  R.diagonal().array() += jitter;
  return R;
}

ResolvedConfig resolve_config(const GpAnovaConfig& config, const CurveBatch& a, const CurveBatch& b) {
  check_batches(a, b);
  if (config.iterations <= config.burn_in || config.burn_in < 0 || config.thin < 1) {
    throw Error(Errc::InvalidParam, "need iterations > burn_in >= 0 and thin >= 1");
  }
  if (!(config.jitter >= 0.0)) throw Error(Errc::InvalidParam, "jitter must be >= 0");
  for (double s : config.step) {
    if (!(s >= 0.0)) throw Error(Errc::InvalidParam, "MH steps must be >= 0");
  }
  ResolvedConfig rc;
  rc.config = config;

  Eigen::MatrixXd all(a.count() + b.count(), a.points());
  all << a.curves, b.curves;
  const double mean = all.mean();
  const double var = all.size() > 1 ? (all.array() - mean).square().sum() / static_cast<double>(all.size() - 1) : 1.0;
  const double sd = std::sqrt(var);
  rc.sigma2 = config.sigma2_box.value_or(Box{1e-6, 1e3 * std::max(var, 1e-6)});

  const auto& g = a.grid;
  double spacing = std::numeric_limits<double>::infinity();
  for (std::size_t t = 1; t < g.size(); ++t) spacing = std::min(spacing, std::abs(g[t] - g[t - 1]));
  const double span = g.size() > 1 ? std::abs(g.back() - g.front()) : 1.0;
  if (!std::isfinite(spacing) || spacing <= 0.0) spacing = span;
  rc.tau = config.tau_box.value_or(Box{spacing, std::max(span, spacing * (1.0 + 1e-9))});
  rc.phi = config.phi_box.value_or(Box{all.minCoeff() - 3.0 * sd, all.maxCoeff() + 3.0 * sd});
  if (rc.phi.hi <= rc.phi.lo) rc.phi = Box{rc.phi.lo - 1.0, rc.phi.hi + 1.0};

  for (const Box* box : {&rc.sigma2, &rc.tau, &rc.phi}) {
    if (!(box->lo < box->hi) || !std::isfinite(box->lo) || !std::isfinite(box->hi)) {
      throw Error(Errc::InvalidParam, "prior boxes need finite lo < hi");
    }
  }
  if (rc.sigma2.lo < 0.0 || rc.tau.lo <= 0.0) throw Error(Errc::InvalidParam, "variance and tau boxes must be positive");
  return rc;
}

GpAnovaState initial_state(const CurveBatch& a, const CurveBatch& b, const ResolvedConfig& rc) {
  const Eigen::VectorXd mean_a = a.curves.colwise().mean().transpose();
  const Eigen::VectorXd mean_b = b.curves.colwise().mean().transpose();
  GpAnovaState s;
  s.mu = 0.5 * (mean_a + mean_b);
  s.alpha_a = 0.5 * (mean_a - mean_b);
  s.alpha_b = -s.alpha_a;
  s.phi = std::clamp(s.mu.mean(), rc.phi.lo, rc.phi.hi);
  Eigen::MatrixXd all(a.count() + b.count(), a.points());
  all << a.curves, b.curves;
  const double var = std::max((all.array() - all.mean()).square().mean(), 1e-3);
  for (double& v : s.sigma2) v = std::clamp(var, rc.sigma2.lo, rc.sigma2.hi);
  for (double& t : s.tau) t = std::sqrt(rc.tau.lo * rc.tau.hi);
  return s;
}

void update_block(GibbsBlock block, GpAnovaState& s, const CurveBatch& a, const CurveBatch& b, const ResolvedConfig& rc,
                  Rng& rng) {
  const bool printed = rc.config.variant == ConditionalVariant::AsPrinted;
  const double jitter = rc.config.jitter;
  const int p = a.points();
  const double na = a.count();
  const double nb = b.count();
  switch (block) {
    case GibbsBlock::Phi: {
      const Corr r(a.grid, s.tau[kMu], jitter);
      const Eigen::VectorXd ones = Eigen::VectorXd::Ones(p);
      const Eigen::VectorXd Linv1 = r.L.triangularView<Eigen::Lower>().solve(ones);
      const Eigen::VectorXd Linvmu = r.L.triangularView<Eigen::Lower>().solve(s.mu);
      const double one_r_one = Linv1.squaredNorm();
      const double one_r_mu = Linv1.dot(Linvmu);
      const double precision = one_r_one / s.sigma2[kMu];
      const double mean = printed ? one_r_mu / precision : one_r_mu / one_r_one;
      try {
        s.phi = sample_truncated_normal(mean, 1.0 / std::sqrt(precision), rc.phi.lo, rc.phi.hi, rng);
      } catch (const Error& e) {
        throw Error(e.code(), std::string("phi: ") + e.what());
      }
      break;
    }
    case GibbsBlock::Mu: {
      const Eigen::MatrixXd re = Corr(a.grid, s.tau[kEps], jitter).inverse();
      const Eigen::MatrixXd rm = Corr(a.grid, s.tau[kMu], jitter).inverse();
      const Eigen::VectorXd sum = (a.curves.colwise().sum().transpose() - na * s.alpha_a) +
                                  (b.curves.colwise().sum().transpose() - nb * s.alpha_b);
      const Eigen::MatrixXd precision = (na + nb) / s.sigma2[kEps] * re + rm / s.sigma2[kMu];
      const Eigen::VectorXd linear = re * sum / s.sigma2[kEps] + rm * Eigen::VectorXd::Constant(p, s.phi / s.sigma2[kMu]);
      s.mu = draw_canonical(precision, linear, rng);
      break;
    }
    case GibbsBlock::Alpha: {
      const Eigen::MatrixXd re = Corr(a.grid, s.tau[kEps], jitter).inverse();
      const Eigen::MatrixXd ra = Corr(a.grid, s.tau[kAlpha], jitter).inverse();
      const Eigen::VectorXd dev_a = a.curves.colwise().sum().transpose() - na * s.mu;
      const Eigen::VectorXd dev_b = b.curves.colwise().sum().transpose() - nb * s.mu;
      const double n = printed ? na : na + nb;
      const Eigen::VectorXd contrast = printed ? dev_a : (dev_a - dev_b).eval();
      const Eigen::MatrixXd precision = n / s.sigma2[kEps] * re + 2.0 / s.sigma2[kAlpha] * ra;
      s.alpha_a = draw_canonical(precision, re * contrast / s.sigma2[kEps], rng);
      s.alpha_b = -s.alpha_a;
      break;
    }
    case GibbsBlock::Sigma2Eps: {
      const double d = d0(s, a, b, Corr(a.grid, s.tau[kEps], jitter));
      s.sigma2[kEps] = draw_variance("sigma2_eps", (na + nb) * p / 2.0 - 1.0, d / 2.0, rc.sigma2, rng);
      break;
    }
    case GibbsBlock::Sigma2Mu: {
      const double d = d1(s, Corr(a.grid, s.tau[kMu], jitter));
      s.sigma2[kMu] = draw_variance("sigma2_mu", p / 2.0 - 1.0, d / 2.0, rc.sigma2, rng);
      break;
    }
    case GibbsBlock::Sigma2Alpha: {
      const double d = d2(s, Corr(a.grid, s.tau[kAlpha], jitter));
      const double shape = printed ? p / 2.0 + 1.0 : p / 2.0 - 1.0;
      s.sigma2[kAlpha] = draw_variance("sigma2_alpha", shape, d, rc.sigma2, rng);
      break;
    }
  }
}

GpAnovaState gibbs_step(const GpAnovaState& state, const CurveBatch& a, const CurveBatch& b, const ResolvedConfig& rc,
                        Rng& rng) {
  GpAnovaState s = state;
  for (auto block : {GibbsBlock::Phi, GibbsBlock::Mu, GibbsBlock::Alpha, GibbsBlock::Sigma2Eps, GibbsBlock::Sigma2Mu,
                     GibbsBlock::Sigma2Alpha}) {
    update_block(block, s, a, b, rc, rng);
  }
  return s;
}

double log_tau_conditional(Component c, double tau, const GpAnovaState& s, const CurveBatch& a, const CurveBatch& b,
                           const ResolvedConfig& rc) {
  if (!rc.tau.contains(tau)) return -std::numeric_limits<double>::infinity();
  const Corr r(a.grid, tau, rc.config.jitter);
  switch (c) {
    case kEps:
      return -d0(s, a, b, r) / (2.0 * s.sigma2[kEps]) - 0.5 * (a.count() + b.count()) * r.logdet;
    case kMu:
      return -d1(s, r) / (2.0 * s.sigma2[kMu]) - 0.5 * r.logdet;
    case kAlpha:
      return -d2(s, r) / s.sigma2[kAlpha] - 0.5 * r.logdet;
  }
  return -std::numeric_limits<double>::infinity();
}

GpAnovaState mh_step_tau(const GpAnovaState& state, const CurveBatch& a, const CurveBatch& b, const ResolvedConfig& rc,
                         const std::array<double, 3>& step, MhCounters& counters, Rng& rng) {
  GpAnovaState s = state;
  for (Component c : {kEps, kMu, kAlpha}) {
    const double z = rng.normal();
    const double u = rng.uniform();
    ++counters.proposed[c];
    const double current = s.tau[c];
    const double proposal = current * std::exp(step[c] * z);
    if (!rc.tau.contains(proposal)) continue;
    // Random walk on log tau: the Jacobian contributes log(proposal / current).
    const double log_ratio = log_tau_conditional(c, proposal, s, a, b, rc) -
                             log_tau_conditional(c, current, s, a, b, rc) + std::log(proposal / current);
    if (std::log(u) < log_ratio) {
      s.tau[c] = proposal;
      ++counters.accepted[c];
    }
  }
  return s;
}

GpAnovaChain run_sampler(const CurveBatch& a, const CurveBatch& b, const GpAnovaConfig& config, Rng& rng) {
  GpAnovaChain chain;
  chain.config = resolve_config(config, a, b);
  const ResolvedConfig& rc = chain.config;
  GpAnovaState s = initial_state(a, b, rc);
  std::array<double, 3> step = config.step;
  MhCounters window, kept;
  constexpr int kTuneEvery = 100;

  chain.samples.reserve(static_cast<std::size_t>((config.iterations - config.burn_in) / config.thin));
  for (int it = 0; it < config.iterations; ++it) {
    s = gibbs_step(s, a, b, rc, rng);
    const bool burning = it < config.burn_in;
    s = mh_step_tau(s, a, b, rc, step, burning ? window : kept, rng);
    if (burning && config.tune_steps && (it + 1) % kTuneEvery == 0) {
      for (Component c : {kEps, kMu, kAlpha}) {
        const double rate = window.rate(c);
        if (rate < 0.30) step[c] *= 0.8;
        else if (rate > 0.45) step[c] *= 1.25;
      }
      window = MhCounters{};
    }
    if (!burning && (it - config.burn_in + 1) % config.thin == 0) chain.samples.push_back(s);
  }
  chain.step = step;
  for (Component c : {kEps, kMu, kAlpha}) chain.acceptance[c] = kept.rate(c);
  const int p = a.points();
  chain.mu_mean = Eigen::VectorXd::Zero(p);
  chain.alpha_mean = Eigen::VectorXd::Zero(p);
  for (const auto& x : chain.samples) {
    chain.mu_mean += x.mu;
    chain.alpha_mean += x.alpha_a;
  }
  if (!chain.samples.empty()) {
    chain.mu_mean /= static_cast<double>(chain.samples.size());
    chain.alpha_mean /= static_cast<double>(chain.samples.size());
  }
  return chain;
}

std::vector<double> test_alpha_diff(const GpAnovaChain& chain) {
  if (chain.samples.empty()) throw Error(Errc::InvalidParam, "empty chain");
  const auto p = chain.samples.front().alpha_a.size();
  std::vector<double> prob(static_cast<std::size_t>(p), 0.0);
  for (const auto& s : chain.samples) {
    for (Eigen::Index t = 0; t < p; ++t) {
      if (s.alpha_a(t) - s.alpha_b(t) > 0.0) prob[t] += 1.0;
    }
  }
  for (double& v : prob) v /= static_cast<double>(chain.samples.size());
  return prob;
}

}  // namespace voxelflow
