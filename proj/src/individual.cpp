#include "voxelflow/individual.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "voxelflow/distributions.hpp"
#include "voxelflow/error.hpp"

namespace voxelflow {

namespace {

void require_dof(const FilterState& state) {
  if (state.dof < kNormalApproxDof) {
    throw Error(Errc::DofTooSmall, "n_T=" + std::to_string(state.dof) + " < 30; normal approximation not admissible");
  }
}

void require_coef(const FilterState& state, int coef) {
  if (coef < 0 || coef >= state.p()) {
    throw Error(Errc::IndexOutOfRange, "coefficient " + std::to_string(coef) + " outside 0.." + std::to_string(state.p() - 1));
  }
}

TestMode test_mode_of(SummaryMode mode) {
  switch (mode) {
    case SummaryMode::Marginal: return TestMode::Marginal;
    case SummaryMode::Joint: return TestMode::Joint;
    case SummaryMode::Average: return TestMode::Average;
  }
  return TestMode::Marginal;
}

double scalar_positive(double mean, double var) {
  if (var > 0.0) return normal_cdf(mean / std::sqrt(var));
  return mean > 0.0 ? 1.0 : 0.0;
}

}  // namespace

std::string_view to_string(TestMode mode) {
  switch (mode) {
    case TestMode::Marginal: return "marginal";
    case TestMode::Joint: return "joint";
    case TestMode::Average: return "average";
    case TestMode::SharpF: return "sharp";
    case TestMode::Trajectory: return "trajectory";
  }
  return "?";
}

std::string_view to_string(SummaryMode mode) { return to_string(test_mode_of(mode)); }

std::string_view to_string(EvidenceRule rule) { return rule == EvidenceRule::AllTimes ? "all" : "per-time"; }

TestMode parse_test_mode(std::string_view name) {
  for (auto m : {TestMode::Marginal, TestMode::Joint, TestMode::Average, TestMode::SharpF, TestMode::Trajectory}) {
    if (name == to_string(m)) return m;
  }
  throw Error(Errc::InvalidParam, "unknown test '" + std::string(name) + "'");
}

SummaryMode parse_summary_mode(std::string_view name) {
  for (auto m : {SummaryMode::Marginal, SummaryMode::Joint, SummaryMode::Average}) {
    if (name == to_string(m)) return m;
  }
  throw Error(Errc::InvalidParam, "unknown summary '" + std::string(name) + "'");
}

EvidenceRule parse_evidence_rule(std::string_view name) {
  if (name == "all") return EvidenceRule::AllTimes;
  if (name == "per-time") return EvidenceRule::PerTime;
  throw Error(Errc::InvalidParam, "unknown evidence rule '" + std::string(name) + "'");
}

PosteriorSummary summarize(const FilterState& state, int coef, SummaryMode mode) {
  require_dof(state);
  require_coef(state, coef);
  const int q = state.q();
  const double c = state.left(coef, coef);
  PosteriorSummary s;
  s.mode = mode;
  s.coef = coef;
  s.t = state.t;
  switch (mode) {
    case SummaryMode::Marginal:
      s.mean = Eigen::VectorXd::Constant(1, state.mean(coef, 0));
      s.cov = Eigen::MatrixXd::Constant(1, 1, c * state.right(0, 0));
      break;
    case SummaryMode::Joint:
      s.mean = state.mean.row(coef).transpose();
      s.cov = c * state.right;
      break;
    case SummaryMode::Average: {
      const double total = state.right.sum();
      if (!(total > 0.0)) throw Error(Errc::NotPsd, "1'S1 <= 0 in the average test");
      s.mean = Eigen::VectorXd::Constant(1, state.mean.row(coef).sum() / q);
      s.cov = Eigen::MatrixXd::Constant(1, 1, c * total / (static_cast<double>(q) * q));
      break;
    }
  }
  return s;
}

TestResult summary_probability(const PosteriorSummary& summary, int draws, Rng& rng) {
  TestResult r;
  r.mode = test_mode_of(summary.mode);
  r.coef = summary.coef;
  r.t_start = r.t_end = summary.t;
  if (summary.mean.size() == 1) {
    r.mean_summary = summary.mean(0);
    r.var_summary = summary.cov(0, 0);
    r.probability = scalar_positive(r.mean_summary, r.var_summary);
    return r;
  }
  const auto est = mvn_orthant_mc(summary.mean, summary.cov, draws, rng);
  r.probability = est.probability;
  r.mc_se = est.standard_error;
  r.mean_summary = summary.mean.minCoeff();
  r.var_summary = summary.cov.diagonal().maxCoeff();
  return r;
}

TestResult test_marginal(const FilterState& state, int coef) {
  Rng unused(0);
  return summary_probability(summarize(state, coef, SummaryMode::Marginal), 0, unused);
}

TestResult test_joint(const FilterState& state, int coef, int draws, Rng& rng) {
  return summary_probability(summarize(state, coef, SummaryMode::Joint), draws, rng);
}

TestResult test_average(const FilterState& state, int coef) {
  Rng unused(0);
  return summary_probability(summarize(state, coef, SummaryMode::Average), 0, unused);
}

TestResult sharp_f_evidence(const FilterState& state, std::span<const int> subset, int column) {
  if (subset.empty()) throw Error(Errc::InvalidParam, "sharp test needs a nonempty coefficient subset");
  if (column < 0 || column >= state.q()) throw Error(Errc::IndexOutOfRange, "column outside the cluster");
  const auto k = static_cast<Eigen::Index>(subset.size());
  Eigen::VectorXd m(k);
  Eigen::MatrixXd C(k, k);
  for (Eigen::Index a = 0; a < k; ++a) {
    require_coef(state, subset[a]);
    m(a) = state.mean(subset[a], column);
    for (Eigen::Index b = 0; b < k; ++b) C(a, b) = state.left(subset[a], subset[b]);
  }
  C *= state.right(column, column);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(C);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.vectorD().minCoeff() <= 0.0) {
    throw Error(Errc::Singular, "posterior scale of the tested coefficients is singular");
  }
  const double stat = m.dot(ldlt.solve(m)) / static_cast<double>(k);
  TestResult r;
  r.mode = TestMode::SharpF;
  r.coef = subset[0];
  r.t_start = r.t_end = state.t;
  r.mean_summary = stat;
  r.var_summary = 0.0;
  r.probability = f_sf(std::max(stat, 0.0), static_cast<double>(k), state.dof);
  return r;
}

TrajectoryDraws simulate_trajectories(const FilterTrajectory& run, const DesignMatrix& design, const ModelSpec& spec,
                                      const PriorSpec& prior, SummaryMode mode, int coef, int window_start,
                                      int replicates, Rng& rng) {
  const int T = run.frames();
  if (T != design.frames()) throw Error(Errc::DimensionMismatch, "trajectory and design lengths differ");
  if (window_start < 1 || window_start > T) {
    throw Error(Errc::InvalidParam, "window start " + std::to_string(window_start) + " outside 1.." + std::to_string(T));
  }
  if (replicates < 1) throw Error(Errc::InvalidParam, "need at least one replicate");
  const FilterState& fin = run.final_state();
  require_coef(fin, coef);
  const int q = fin.q();
  const double obs_sd = std::sqrt(spec.obs_scale);

  TrajectoryDraws out;
  out.window_start = window_start;
  out.values.resize(replicates, T - window_start + 1);
  Eigen::MatrixXd Y(q, T);
  Eigen::VectorXd z(q);
  for (int k = 0; k < replicates; ++k) {
    const Eigen::MatrixXd sigma = sample_inverse_wishart(fin.dof + q - 1.0, fin.dof * fin.right, rng);
    const Eigen::MatrixXd L = chol_psd(sigma);
    for (int t = 1; t <= T; ++t) {
      const FilterState& s = run.states[t];
      const Eigen::MatrixXd theta = sample_matrix_t(MatrixTParams{s.dof, s.mean, s.left, s.right}, rng);
      for (int v = 0; v < q; ++v) z(v) = rng.normal();
      Y.col(t - 1) = theta.transpose() * design.regressor(t - 1) + obs_sd * (L * z);
    }
    const auto means = filter_means(Y, design, spec, prior, window_start);
    for (int w = 0; w < static_cast<int>(means.size()); ++w) {
      const auto row = means[w].row(coef);
      double value = 0.0;
      switch (mode) {
        case SummaryMode::Marginal: value = row(0); break;
        case SummaryMode::Joint: value = row.minCoeff(); break;
        case SummaryMode::Average: value = row.mean(); break;
      }
      out.values(k, w) = value;
    }
  }
  return out;
}

TestResult evidence_from_trajectories(const TrajectoryDraws& draws, EvidenceRule rule, double threshold) {
  const Eigen::Index n = draws.values.rows();
  const Eigen::Index w = draws.values.cols();
  if (n < 1 || w < 1) throw Error(Errc::InvalidParam, "empty trajectory draws");
  double p = 0.0;
  if (rule == EvidenceRule::AllTimes) {
    Eigen::Index hits = 0;
    for (Eigen::Index k = 0; k < n; ++k) {
      if ((draws.values.row(k).array() > threshold).all()) ++hits;
    }
    p = static_cast<double>(hits) / static_cast<double>(n);
  } else {
    const auto above = (draws.values.array() > threshold).cast<double>();
    p = above.sum() / static_cast<double>(n * w);
  }
  TestResult r;
  r.mode = TestMode::Trajectory;
  r.probability = p;
  r.mc_se = std::sqrt(p * (1.0 - p) / static_cast<double>(n));
  r.mean_summary = draws.values.col(w - 1).mean();
  r.var_summary = n > 1 ? (draws.values.col(w - 1).array() - r.mean_summary).square().sum() / (n - 1) : 0.0;
  r.t_start = draws.window_start;
  r.t_end = draws.window_start + static_cast<int>(w) - 1;
  return r;
}

Volume4D EvidenceMap::to_volume(double time_step) const {
  return Volume4D(dims, 1, values, time_step, NonFinite::Allow);
}

}  // namespace voxelflow
