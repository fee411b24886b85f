#include "doctest.h"

#include <cmath>
#include <vector>

#include "fixtures.hpp"
#include "voxelflow/error.hpp"
#include "voxelflow/simulate.hpp"

using namespace voxelflow;

TEST_CASE("white noise variance concentrates") {
  SimSpec spec;
  spec.dims = {8, 8, 8};
  spec.frames = 200;
  spec.seed = 131;
  const SimResult sim = simulate(spec);
  CHECK(sim.truth.count() == 0);
  int inside = 0;
  for (std::size_t idx = 0; idx < spec.dims.count(); ++idx) {
    const auto s = sim.bold.series_view(spec.dims.voxel(idx));
    double mean = 0.0, var = 0.0;
    for (double v : s) mean += v / s.size();
    for (double v : s) var += (v - mean) * (v - mean) / (s.size() - 1);
    inside += var >= 0.8 && var <= 1.2;
  }
  CHECK(inside >= 0.95 * spec.dims.count());
}

TEST_CASE("AR(1) lag-one autocorrelation") {
  SimSpec spec;
  spec.dims = {6, 6, 6};
  spec.frames = 200;
  spec.noise = NoiseModel::Ar1;
  spec.rho = 0.5;
  spec.sd = 2.0;
  spec.seed = 132;
  const SimResult sim = simulate(spec);
  double num = 0.0, den = 0.0, sq = 0.0;
  std::size_t n = 0;
  for (std::size_t idx = 0; idx < spec.dims.count(); ++idx) {
    const auto s = sim.bold.series_view(spec.dims.voxel(idx));
    double mean = 0.0;
    for (double v : s) mean += v / s.size();
    for (std::size_t t = 0; t < s.size(); ++t) {
      den += (s[t] - mean) * (s[t] - mean);
      if (t) num += (s[t] - mean) * (s[t - 1] - mean);
      sq += s[t] * s[t];
      ++n;
    }
  }
  CHECK(num / den == doctest::Approx(0.5).epsilon(0.2));
  CHECK(sq / n == doctest::Approx(4.0).epsilon(0.1));
}

TEST_CASE("signal sits on top of the same noise stream") {
  SimSpec null;
  null.dims = {5, 5, 5};
  null.frames = 40;
  null.seed = 133;
  null.regressor = fixture::block_regressor(40);
  SimSpec zero = null;
  zero.signal_box = VoxelBox{{1, 1, 1}, {2, 2, 2}};
  zero.amplitude = 0.0;
  const SimResult a = simulate(null), b = simulate(zero);
  CHECK(std::equal(a.bold.data().begin(), a.bold.data().end(), b.bold.data().begin()));

  SimSpec sig = zero;
  sig.amplitude = 1.5;
  sig.baseline = 10.0;
  const SimResult c = simulate(sig);
  CHECK(c.truth.count() == 8);
  for (std::size_t idx = 0; idx < null.dims.count(); ++idx) {
    const Voxel v = null.dims.voxel(idx);
    for (int t = 0; t < 40; ++t) {
      const double extra = sig.signal_box->contains(v) ? 1.5 * null.regressor[t] : 0.0;
      CHECK(c.bold.at(v, t) == doctest::Approx(a.bold.at(v, t) + 10.0 + extra).epsilon(1e-12));
    }
  }
}

TEST_CASE("subject streams differ, seeds reproduce") {
  SimSpec s;
  s.dims = {3, 3, 3};
  s.frames = 10;
  const SimResult a = simulate(s), b = simulate(s);
  CHECK(std::equal(a.bold.data().begin(), a.bold.data().end(), b.bold.data().begin()));
  s.subject = 1;
  const SimResult c = simulate(s);
  CHECK_FALSE(std::equal(a.bold.data().begin(), a.bold.data().end(), c.bold.data().begin()));
}

TEST_CASE("invalid simulation specs") {
  SimSpec s;
  s.noise = NoiseModel::Ar1;
  s.rho = 1.0;
  CHECK_THROWS_AS(simulate(s), Error);
  SimSpec t;
  t.signal_box = VoxelBox{{0, 0, 0}, {1, 1, 1}};
  t.amplitude = 1.0;
  CHECK_THROWS_AS(simulate(t), Error);  // no regressor
  SimSpec u;
  u.sd = -1.0;
  CHECK_THROWS_AS(simulate(u), Error);
}

TEST_CASE("false-positive validation report") {
  SimSpec spec;
  spec.dims = {8, 8, 8};
  spec.frames = 100;
  spec.seed = 134;
  spec.regressor = fixture::block_regressor(100);
  const DesignMatrix design = build_design(spec.regressor, 1);
  ValidationConfig cfg;
  cfg.test.joint_draws = 2000;
  const FprReport r = validate_fpr(spec, design, {}, {}, cfg);
  REQUIRE(r.individual.size() == 3);
  CHECK(r.total == 512);
  const FprEntry& marginal = r.individual[0];
  const FprEntry& joint = r.individual[1];
  const FprEntry& average = r.individual[2];
  CHECK(marginal.mode == TestMode::Marginal);
  CHECK(marginal.evaluated == 512);
  CHECK(joint.fpr <= marginal.fpr);
  CHECK(std::abs(marginal.fpr - average.fpr) <= 0.02);
  CHECK(marginal.fpr <= 0.10);
  CHECK(r.group.empty());

  ValidationConfig strict = cfg;
  strict.cutoff = 1.0;
  strict.modes = {TestMode::Marginal};
  const FprReport none = validate_fpr(spec, design, {}, {}, strict);
  CHECK(none.individual[0].declared == 0);
  CHECK(none.individual[0].fpr == 0.0);

  ValidationConfig group = cfg;
  group.modes = {TestMode::Marginal};
  group.group_subjects = 3;
  const FprReport g = validate_fpr(spec, design, {}, {}, group);
  REQUIRE(g.group.size() == 1);
  CHECK(g.group_subjects == 3);
  CHECK(g.group[0].evaluated == 512);
}
