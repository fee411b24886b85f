#include "voxelflow/mdlm.hpp"

#include <cmath>
#include <string>

#include "voxelflow/error.hpp"

namespace voxelflow {

namespace {

void symmetrize(Eigen::MatrixXd& A) { A = 0.5 * (A + A.transpose()).eval(); }

struct UpdateWorkspace {
  Eigen::MatrixXd a;
  Eigen::MatrixXd R;
  Eigen::VectorXd f;
  Eigen::VectorXd A;
  Eigen::VectorXd e;
  double Q = 0.0;
};

// Shared core of filter_step; writes the new state in place.
void update(FilterState& s, const Eigen::VectorXd& F, const Eigen::VectorXd& Y, const ModelSpec& spec,
            UpdateWorkspace& w) {
  if (spec.evolution.size() == 0) {
    w.a = s.mean;
    w.R = s.left / spec.discount;
  } else {
    w.a = spec.evolution * s.mean;
    w.R = spec.evolution * s.left * spec.evolution.transpose() / spec.discount;
  }
  symmetrize(w.R);
  w.f = w.a.transpose() * F;
  const Eigen::VectorXd RF = w.R * F;
  w.Q = spec.obs_scale + F.dot(RF);
  w.A = RF / w.Q;
  w.e = Y - w.f;

  const double prev_dof = s.dof;
  s.t += 1;
  s.dof = prev_dof + 1.0;
  s.mean = w.a + w.A * w.e.transpose();
  s.left = w.R - w.A * w.A.transpose() * w.Q;
  symmetrize(s.left);
  s.right = (prev_dof * s.right + w.e * w.e.transpose() / w.Q) / s.dof;
  symmetrize(s.right);
}

void check_dims(const FilterState& s, const Eigen::VectorXd& F, const Eigen::VectorXd& Y, const ModelSpec& spec) {
  if (F.size() != s.p() || Y.size() != s.q() || s.left.rows() != s.p() || s.right.rows() != s.q()) {
    throw Error(Errc::DimensionMismatch, "regressor/observation sizes do not match the state");
  }
  if (spec.evolution.size() != 0 && (spec.evolution.rows() != s.p() || spec.evolution.cols() != s.p())) {
    throw Error(Errc::DimensionMismatch, "evolution matrix must be p x p");
  }
}

void check_run_inputs(const Eigen::MatrixXd& series, const DesignMatrix& design, const ModelSpec& spec) {
  if (series.cols() != design.frames()) {
    throw Error(Errc::DimensionMismatch, "series length " + std::to_string(series.cols()) +
                                             " does not match design length " + std::to_string(design.frames()));
  }
  if (!series.allFinite()) throw Error(Errc::InvalidParam, "series contains non-finite values");
  spec.validate(design.p());
}

}  // namespace

void ModelSpec::validate(int p) const {
  if (!(discount > 0.5 && discount <= 1.0)) throw Error(Errc::InvalidParam, "discount must lie in (0.5, 1]");
  if (!(obs_scale > 0.0) || !std::isfinite(obs_scale)) throw Error(Errc::InvalidParam, "V must be positive");
  if (evolution.size() != 0) {
    if (evolution.rows() != p || evolution.cols() != p) throw Error(Errc::DimensionMismatch, "G must be p x p");
    if (!evolution.allFinite()) throw Error(Errc::InvalidParam, "G must be finite");
  }
}

FilterState init_prior(int p, int q, const PriorSpec& prior) {
  if (p < 1 || q < 1) throw Error(Errc::InvalidParam, "p and q must be >= 1");
  if (!(prior.c0 > 0.0) || !(prior.s0 > 0.0) || !(prior.n0 >= 1.0)) {
    throw Error(Errc::InvalidParam, "prior needs c0 > 0, s0 > 0, n0 >= 1");
  }
  FilterState s;
  s.t = 0;
  s.dof = prior.n0;
  s.mean = Eigen::MatrixXd::Zero(p, q);
  s.left = prior.c0 * Eigen::MatrixXd::Identity(p, p);
  s.right = prior.s0 * Eigen::MatrixXd::Identity(q, q);
  return s;
}

std::pair<FilterState, StepDiagnostics> filter_step(const FilterState& state, const Eigen::VectorXd& regressor,
                                                     const Eigen::VectorXd& observation, const ModelSpec& spec) {
  check_dims(state, regressor, observation, spec);
  spec.validate(state.p());
  if (!observation.allFinite() || !regressor.allFinite()) {
    throw Error(Errc::InvalidParam, "observation and regressor must be finite");
  }
  FilterState next = state;
  UpdateWorkspace w;
  update(next, regressor, observation, spec, w);
  StepDiagnostics diag{w.a, w.R, w.f, w.Q, w.A, w.e};
  return {std::move(next), std::move(diag)};
}

FilterTrajectory filter_run(const Eigen::MatrixXd& series, const DesignMatrix& design, const ModelSpec& spec,
                            const PriorSpec& prior) {
  check_run_inputs(series, design, spec);
  FilterTrajectory run;
  const int frames = design.frames();
  run.states.reserve(frames + 1);
  run.states.push_back(init_prior(design.p(), static_cast<int>(series.rows()), prior));
  UpdateWorkspace w;
  FilterState s = run.states.front();
  for (int t = 0; t < frames; ++t) {
    update(s, design.regressor(t), series.col(t), spec, w);
    run.states.push_back(s);
  }
  return run;
}

std::vector<Eigen::MatrixXd> filter_means(const Eigen::MatrixXd& series, const DesignMatrix& design,
                                          const ModelSpec& spec, const PriorSpec& prior, int first) {
  check_run_inputs(series, design, spec);
  const int frames = design.frames();
  std::vector<Eigen::MatrixXd> means;
  means.reserve(std::max(0, frames - first + 1));
  FilterState s = init_prior(design.p(), static_cast<int>(series.rows()), prior);
  UpdateWorkspace w;
  for (int t = 0; t < frames; ++t) {
    update(s, design.regressor(t), series.col(t), spec, w);
    if (s.t >= first) means.push_back(s.mean);
  }
  return means;
}

PosteriorMarginal posterior_at(const FilterTrajectory& run, int t) {
  if (t < 1 || t > run.frames()) {
    throw Error(Errc::OutOfBounds, "posterior_at: t=" + std::to_string(t) + " outside 1.." + std::to_string(run.frames()));
  }
  const FilterState& s = run.states[t];
  PosteriorMarginal out;
  out.params = MatrixTParams{s.dof, s.mean, s.left, s.right};
  out.normal_approximation = s.dof >= kNormalApproxDof;
  return out;
}

}  // namespace voxelflow
