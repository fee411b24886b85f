#include "doctest.h"

#include <cmath>
#include <functional>
#include <vector>

#include "oracles.hpp"
#include "voxelflow/error.hpp"
#include "voxelflow/mdlm.hpp"
#include "voxelflow/rng.hpp"

using namespace voxelflow;

namespace {

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return Errc::InvalidParam;
}

DesignMatrix random_design(int T, int p, Rng& rng) {
  DesignMatrix d;
  d.rows.resize(T, p);
  for (int t = 0; t < T; ++t) {
    d.rows(t, 0) = rng.normal();
    for (int c = 1; c < p; ++c) d.rows(t, c) = c == 1 ? 1.0 : rng.normal() * 0.5;
  }
  return d;
}

Eigen::MatrixXd random_series(int q, int T, Rng& rng) {
  Eigen::MatrixXd y(q, T);
  for (int v = 0; v < q; ++v)
    for (int t = 0; t < T; ++t) y(v, t) = 0.3 * v + rng.normal();
  return y;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace

TEST_CASE("init_prior") {
  const FilterState s = init_prior(2, 7);
  CHECK(s.mean == Eigen::MatrixXd::Zero(2, 7));
  CHECK(s.left == 100.0 * Eigen::MatrixXd::Identity(2, 2));
  CHECK(s.right == Eigen::MatrixXd::Identity(7, 7));
  CHECK(s.dof == 1.0);
  CHECK(s.t == 0);
  CHECK(code_of([] { init_prior(2, 1, {0.0, 1.0, 1.0}); }) == Errc::InvalidParam);
}

TEST_CASE("model spec validation") {
  ModelSpec spec;
  spec.discount = 0.5;
  CHECK(code_of([&] { spec.validate(2); }) == Errc::InvalidParam);
  spec.discount = 1.0;
  spec.evolution = Eigen::MatrixXd::Identity(3, 3);
  CHECK(code_of([&] { spec.validate(2); }) == Errc::DimensionMismatch);
  spec.evolution = Eigen::MatrixXd::Identity(2, 2);
  CHECK_NOTHROW(spec.validate(2));
}

TEST_CASE("single step follows the update equations") {
  Rng rng(51);
  FilterState s = init_prior(2, 2, {3.0, 1.5, 4.0});
  s.mean << 0.2, -0.1, 0.4, 0.3;
  ModelSpec spec;
  spec.discount = 0.9;
  const Eigen::Vector2d F(0.7, 1.0), Y(1.2, -0.4);
  const auto [next, diag] = filter_step(s, F, Y, spec);

  const Eigen::MatrixXd R = s.left / 0.9;
  const double Q = 1.0 + F.dot(R * F);
  const Eigen::VectorXd A = R * F / Q;
  const Eigen::VectorXd e = Y - s.mean.transpose() * F;
  CHECK(diag.forecast_scale == doctest::Approx(Q));
  CHECK((next.mean - (s.mean + A * e.transpose())).norm() < 1e-12);
  CHECK((next.left - (R - A * A.transpose() * Q)).norm() < 1e-12);
  CHECK((next.right - (4.0 * s.right + e * e.transpose() / Q) / 5.0).norm() < 1e-12);
  CHECK(next.dof == 5.0);
  CHECK(next.t == 1);
}

TEST_CASE("zero regressor leaves the mean and inflates C") {
  FilterState s = init_prior(2, 1);
  s.mean << 1.0, 2.0;
  ModelSpec spec;
  const Eigen::Vector2d F = Eigen::Vector2d::Zero();
  Eigen::VectorXd Y(1);
  Y << 3.0;
  const auto [next, diag] = filter_step(s, F, Y, spec);
  CHECK(next.mean == s.mean);
  CHECK((next.left - s.left / spec.discount).norm() < 1e-12);
  CHECK(next.right(0, 0) == doctest::Approx((1.0 * 1.0 + 9.0) / 2.0));
}

TEST_CASE("dimension mismatch") {
  const FilterState s = init_prior(2, 3);
  CHECK(code_of([&] { filter_step(s, Eigen::VectorXd::Ones(3), Eigen::VectorXd::Ones(3), {}); }) ==
        Errc::DimensionMismatch);
  CHECK(code_of([&] { filter_step(s, Eigen::VectorXd::Ones(2), Eigen::VectorXd::Ones(2), {}); }) ==
        Errc::DimensionMismatch);
}

TEST_CASE("static model equals the batch posterior at every t") {
  Rng rng(52);
  const int T = 50, p = 3;
  const DesignMatrix d = random_design(T, p, rng);
  const Eigen::MatrixXd y = random_series(1, T, rng);
  ModelSpec spec;
  spec.discount = 1.0;
  const PriorSpec prior{10.0, 0.8, 2.0};
  const FilterTrajectory run = filter_run(y, d, spec, prior);
  REQUIRE(run.frames() == T);
  for (int t = 1; t <= T; ++t) {
    const auto ref = oracle::batch_nig(d.rows.topRows(t), y.row(0).head(t).transpose(), prior.c0, prior.s0, prior.n0);
    const FilterState& s = run.states[t];
    double dev = rel(s.right(0, 0), ref.scale) + rel(s.dof, ref.dof);
    for (int i = 0; i < p; ++i) {
      dev += rel(s.mean(i, 0), ref.mean(i));
      for (int j = 0; j < p; ++j) dev += rel(s.left(i, j), ref.left(i, j));
    }
    CHECK(dev < 1e-8);
  }
}

TEST_CASE("dof grows by one per observation and covariances stay symmetric PSD") {
  Rng rng(53);
  const DesignMatrix d = random_design(40, 2, rng);
  const FilterTrajectory run = filter_run(random_series(4, 40, rng), d, {}, {});
  for (int t = 1; t <= 40; ++t) {
    const FilterState& s = run.states[t];
    CHECK(s.dof == run.states[t - 1].dof + 1.0);
    CHECK((s.left - s.left.transpose()).norm() == 0.0);
    CHECK((s.right - s.right.transpose()).norm() == 0.0);
    CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(s.left).eigenvalues().minCoeff() >= -1e-8);
    CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(s.right).eigenvalues().minCoeff() >= -1e-8);
  }
  CHECK(run.states[30].dof == 31.0);
}

TEST_CASE("empty series returns the prior only") {
  DesignMatrix d;
  d.rows.resize(0, 2);
  const FilterTrajectory run = filter_run(Eigen::MatrixXd(3, 0), d, {}, {});
  CHECK(run.frames() == 0);
  CHECK(run.final_state().dof == 1.0);
}

TEST_CASE("scaling the data scales m by c and S by c squared") {
  Rng rng(54);
  const DesignMatrix d = random_design(60, 2, rng);
  const Eigen::MatrixXd y = random_series(3, 60, rng);
  const double c = 3.7;
  PriorSpec base, scaled;
  scaled.s0 = base.s0 * c * c;
  const FilterTrajectory r1 = filter_run(y, d, {}, base);
  const FilterTrajectory r2 = filter_run(c * y, d, {}, scaled);
  for (int t = 1; t <= 60; ++t) {
    CHECK((r2.states[t].mean - c * r1.states[t].mean).norm() <= 1e-10 * (1.0 + c * r1.states[t].mean.norm()));
    CHECK((r2.states[t].right - c * c * r1.states[t].right).norm() <= 1e-10 * c * c * r1.states[t].right.norm());
    CHECK((r2.states[t].left - r1.states[t].left).norm() <= 1e-12 * r1.states[t].left.norm());
  }
}

TEST_CASE("permuting the series permutes m and conjugates S") {
  Rng rng(55);
  const DesignMatrix d = random_design(45, 2, rng);
  const Eigen::MatrixXd y = random_series(4, 45, rng);
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(4);
  perm.indices() << 2, 0, 3, 1;
  const Eigen::MatrixXd py = perm * y;
  const FilterState a = filter_run(y, d, {}, {}).final_state();
  const FilterState b = filter_run(py, d, {}, {}).final_state();
  CHECK((b.mean - a.mean * perm.transpose()).norm() < 1e-10);
  CHECK((b.right - perm * a.right * perm.transpose()).norm() < 1e-10);
}

TEST_CASE("identical series give identical columns") {
  Rng rng(56);
  const DesignMatrix d = random_design(30, 2, rng);
  Eigen::MatrixXd y(3, 30);
  const Eigen::MatrixXd one = random_series(1, 30, rng);
  for (int v = 0; v < 3; ++v) y.row(v) = one.row(0);
  const FilterState s = filter_run(y, d, {}, {}).final_state();
  CHECK((s.mean.col(0) - s.mean.col(1)).norm() == 0.0);
  CHECK((s.mean.col(0) - s.mean.col(2)).norm() == 0.0);
  // Data part of S is rank one: subtracting the prior share leaves a rank-1 matrix.
  const Eigen::MatrixXd data_part = s.right - (1.0 / s.dof) * Eigen::MatrixXd::Identity(3, 3);
  const auto ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(data_part).eigenvalues();
  CHECK(std::abs(ev(0)) < 1e-10);
  CHECK(std::abs(ev(1)) < 1e-10);
}

TEST_CASE("filter_means agrees with the full run") {
  Rng rng(57);
  const DesignMatrix d = random_design(40, 3, rng);
  const Eigen::MatrixXd y = random_series(2, 40, rng);
  const FilterTrajectory run = filter_run(y, d, {}, {});
  const auto means = filter_means(y, d, {}, {}, 10);
  REQUIRE(means.size() == 31);
  for (int t = 10; t <= 40; ++t) CHECK((means[t - 10] - run.states[t].mean).norm() == 0.0);
}

TEST_CASE("posterior_at") {
  Rng rng(58);
  const DesignMatrix d = random_design(35, 2, rng);
  const FilterTrajectory run = filter_run(random_series(2, 35, rng), d, {}, {});
  const PosteriorMarginal last = posterior_at(run, 35);
  CHECK(last.params.mean == run.final_state().mean);
  CHECK(last.params.left == run.final_state().left);
  CHECK(last.params.right == run.final_state().right);
  CHECK(last.params.dof == 36.0);
  CHECK(last.normal_approximation);
  CHECK_FALSE(posterior_at(run, 20).normal_approximation);
  CHECK(posterior_at(run, 29).normal_approximation);
  CHECK(code_of([&] { posterior_at(run, 0); }) == Errc::OutOfBounds);
  CHECK(code_of([&] { posterior_at(run, 36); }) == Errc::OutOfBounds);
}

TEST_CASE("standardized one-step innovations are calibrated on model data") {
  Rng rng(59);
  const int T = 2000;
  const DesignMatrix d = random_design(T, 2, rng);
  const Eigen::Vector2d theta(1.5, -0.5);
  const double sigma = 0.7;
  Eigen::MatrixXd y(1, T);
  for (int t = 0; t < T; ++t) y(0, t) = d.rows.row(t).dot(theta) + sigma * rng.normal();
  ModelSpec spec;
  spec.discount = 1.0;
  FilterState s = init_prior(2, 1);
  double sum = 0.0;
  int used = 0;
  for (int t = 0; t < T; ++t) {
    const FilterState prev = s;
    auto [next, diag] = filter_step(s, d.regressor(t), y.col(t), spec);
    if (t >= 20) {
      sum += diag.error(0) * diag.error(0) / (diag.forecast_scale * prev.right(0, 0));
      ++used;
    }
    CHECK(diag.forecast_scale >= 1.0);
    s = std::move(next);
  }
  CHECK(sum / used == doctest::Approx(1.0).epsilon(0.1));
}
