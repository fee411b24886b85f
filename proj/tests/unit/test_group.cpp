#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <vector>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "voxelflow/error.hpp"
#include "voxelflow/group.hpp"

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

PosteriorSummary scalar(double mean, double var) {
  PosteriorSummary s;
  s.mode = SummaryMode::Marginal;
  s.mean = Eigen::VectorXd::Constant(1, mean);
  s.cov = Eigen::MatrixXd::Constant(1, 1, var);
  return s;
}

SubjectPosterior subject(const std::string& id, double m, double c, double s, int q = 1) {
  SubjectPosterior sp;
  sp.id = id;
  sp.group = "A";
  sp.final_state = fixture::state(Eigen::MatrixXd::Constant(2, q, m), c * Eigen::MatrixXd::Identity(2, 2),
                                  s * Eigen::MatrixXd::Identity(q, q));
  return sp;
}

TrajectoryDraws constant_draws(int n, int w, double value) {
  TrajectoryDraws d;
  d.values = Eigen::MatrixXd::Constant(n, w, value);
  return d;
}

}  // namespace

TEST_CASE("two scalar subjects combine by averaging") {
  const std::vector<PosteriorSummary> s{scalar(1.0, 1.0), scalar(3.0, 1.0)};
  const GroupPosterior g = combine_summaries(s);
  CHECK(g.summary.mean(0) == 2.0);
  CHECK(g.summary.cov(0, 0) == 0.5);
  CHECK(g.subjects == 2);
}

TEST_CASE("one subject reproduces its own test") {
  Rng rng(91);
  const std::vector<SubjectPosterior> one{subject("s1", 0.3, 0.5, 2.0, 3)};
  for (SummaryMode mode : {SummaryMode::Marginal, SummaryMode::Average, SummaryMode::Joint}) {
    const GroupPosterior g = group_posterior(one, mode);
    const PosteriorSummary own = summarize(one[0].final_state, 0, mode);
    CHECK(g.summary.mean == own.mean);
    CHECK(g.summary.cov == own.cov);
    Rng a(3), b(3);
    CHECK(group_test(g, 1000, a).probability == summary_probability(own, 1000, b).probability);
  }
}

TEST_CASE("group moments match averaged independent draws") {
  Rng rng(92);
  std::vector<PosteriorSummary> subjects;
  for (int s = 0; s < 5; ++s) subjects.push_back(scalar(rng.normal(), 0.2 + rng.uniform()));
  const GroupPosterior g = combine_summaries(subjects);
  const int N = 100000;
  std::vector<double> avg(N, 0.0);
  for (const auto& s : subjects) {
    for (int n = 0; n < N; ++n) avg[n] += (s.mean(0) + std::sqrt(s.cov(0, 0)) * rng.normal()) / subjects.size();
  }
  double mean = 0.0, var = 0.0;
  for (double a : avg) mean += a / N;
  for (double a : avg) var += (a - mean) * (a - mean) / (N - 1);
  const double v = g.summary.cov(0, 0);
  CHECK(std::abs(mean - g.summary.mean(0)) <= 4.0 * std::sqrt(v / N));
  CHECK(std::abs(var - v) <= 4.0 * v * std::sqrt(2.0 / (N - 1)));
}

TEST_CASE("variance shrinks as one over n for identical subjects") {
  std::vector<PosteriorSummary> s4(4, scalar(0.5, 2.0)), s8(8, scalar(0.5, 2.0));
  CHECK(combine_summaries(s8).summary.cov(0, 0) * 2.0 == combine_summaries(s4).summary.cov(0, 0));
}

TEST_CASE("subject order does not matter") {
  Rng rng(93);
  std::vector<PosteriorSummary> s;
  for (int n = 0; n < 6; ++n) {
    PosteriorSummary p;
    p.mode = SummaryMode::Joint;
    p.mean = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
    p.cov = (0.5 + rng.uniform()) * Eigen::Matrix3d::Identity();
    s.push_back(p);
  }
  const GroupPosterior a = combine_summaries(s);
  std::vector<PosteriorSummary> r(s.rbegin(), s.rend());
  std::rotate(r.begin(), r.begin() + 2, r.end());
  const GroupPosterior b = combine_summaries(r);
  CHECK((a.summary.mean - b.summary.mean).norm() < 1e-14);
  CHECK((a.summary.cov - b.summary.cov).norm() < 1e-14);
}

TEST_CASE("group test values") {
  Rng rng(94);
  CHECK(group_test(combine_summaries(std::vector{scalar(0.0, 3.0)}), 10, rng).probability == 0.5);
  PosteriorSummary v;
  v.mode = SummaryMode::Joint;
  v.mean = Eigen::Vector2d::Zero();
  v.cov = Eigen::Matrix2d::Identity();
  const TestResult r = group_test(combine_summaries(std::vector{v}), 100000, rng);
  CHECK(std::abs(r.probability - 0.25) <= 3.0 * *r.mc_se);
  v.mean = Eigen::Vector2d::Constant(20.0);
  CHECK(group_test(combine_summaries(std::vector{v}), 1000, rng).probability >= 0.999);
}

TEST_CASE("comparisons") {
  Rng rng(95);
  const GroupPosterior a = combine_summaries(std::vector{scalar(1.0, 0.4)});
  const GroupPosterior b = combine_summaries(std::vector{scalar(6.0, 0.6)});
  CHECK(group_compare(a, a, 10, rng).probability == 0.5);
  CHECK(group_compare(a, b, 10, rng).probability == doctest::Approx(1.0 - 2.866515719e-7).epsilon(1e-12));
  const GroupPosterior c = combine_summaries(std::vector{scalar(1.3, 0.9)});
  const double ab = group_compare(a, c, 10, rng).probability;
  CHECK(ab + group_compare(c, a, 10, rng).probability == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(ab + group_compare(a, c, 10, rng, true).probability == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(ab == doctest::Approx(oracle::std_normal_cdf(0.3 / std::sqrt(1.3))));
}

TEST_CASE("combination errors") {
  CHECK(code_of([] { group_posterior(std::vector<SubjectPosterior>{}, SummaryMode::Marginal); }) == Errc::EmptyGroup);
  const std::vector<SubjectPosterior> mixed{subject("a", 0.0, 1.0, 1.0, 3), subject("b", 0.0, 1.0, 1.0, 4)};
  CHECK(code_of([&] { group_posterior(mixed, SummaryMode::Joint); }) == Errc::InconsistentDims);
}

TEST_CASE("group trajectory evidence") {
  const std::vector<TrajectoryDraws> a{constant_draws(10, 5, 1.0), constant_draws(10, 5, 1.0)};
  const std::vector<TrajectoryDraws> zero{constant_draws(10, 5, 0.0)};
  CHECK(group_trajectory_evidence(a, zero).probability == 1.0);
  CHECK(group_trajectory_evidence(a, a).probability == 0.0);
  CHECK(group_trajectory_evidence(a, {}).probability == 1.0);
  const std::vector<TrajectoryDraws> short_b{constant_draws(9, 5, 0.0)};
  CHECK(code_of([&] { group_trajectory_evidence(a, short_b); }) == Errc::MismatchedDraws);
  CHECK(code_of([&] { group_trajectory_evidence({}, zero); }) == Errc::EmptyGroup);

  Rng rng(96);
  TrajectoryDraws mixed;
  mixed.values.resize(50, 4);
  for (int k = 0; k < 50; ++k)
    for (int w = 0; w < 4; ++w) mixed.values(k, w) = rng.normal() + 0.5;
  const std::vector<TrajectoryDraws> m{mixed};
  const double p = group_trajectory_evidence(m, {}).probability;
  CHECK(p >= 0.0);
  CHECK(p <= 1.0);
  CHECK(p == evidence_from_trajectories(mixed).probability);
}

TEST_CASE("subject manifest") {
  const auto dir = std::filesystem::temp_directory_path() / "voxelflow_manifest";
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "subjects.csv");
    out << "path,id,group\nsub1.nii,s1,A\n/abs/sub2.nii, s2 ,B\n";
  }
  const auto rows = read_subject_manifest(dir / "subjects.csv");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].path == dir / "sub1.nii");
  CHECK(rows[1].path == "/abs/sub2.nii");
  CHECK(rows[1].id == "s2");
  CHECK(rows[1].group == "B");
}

TEST_CASE("run_group") {
  const Dims3 d{4, 4, 3};
  const int T = 60;
  const DesignMatrix design = build_design(fixture::block_regressor(T), 1);
  std::vector<Subject> subjects;
  for (int s = 0; s < 4; ++s)
    subjects.push_back({"s" + std::to_string(s), s < 2 ? "A" : "B", fixture::noise_volume(d, T, 100 + s)});
  const Mask3D mask = Mask3D::full(d);

  SUBCASE("single subject equals run_individual") {
    GroupRunConfig cfg;
    for (TestMode mode : {TestMode::Marginal, TestMode::Joint, TestMode::Average}) {
      cfg.test.mode = mode;
      const std::vector<Subject> one{subjects[0]};
      const EvidenceMap g = run_group(one, mask, design, {}, {}, cfg);
      const EvidenceMap i = run_individual(subjects[0].bold, mask, design, {}, {}, cfg.test);
      CHECK(g.values == i.values);
    }
  }
  SUBCASE("compare direction flips") {
    GroupRunConfig cfg;
    cfg.compare = true;
    const EvidenceMap ba = run_group(subjects, mask, design, {}, {}, cfg);
    cfg.flip = true;
    const EvidenceMap ab = run_group(subjects, mask, design, {}, {}, cfg);
    for (std::size_t n = 0; n < d.count(); ++n) CHECK(ba.values[n] + ab.values[n] == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("subject order does not change the map") {
    GroupRunConfig cfg;
    cfg.test.mode = TestMode::Average;
    std::vector<Subject> rev(subjects.rbegin(), subjects.rend());
    const EvidenceMap a = run_group(subjects, mask, design, {}, {}, cfg);
    const EvidenceMap b = run_group(rev, mask, design, {}, {}, cfg);
    for (std::size_t n = 0; n < d.count(); ++n) CHECK(a.values[n] == doctest::Approx(b.values[n]).epsilon(1e-12));
  }
  SUBCASE("trajectory comparisons run") {
    GroupRunConfig cfg;
    cfg.compare = true;
    cfg.test.mode = TestMode::Trajectory;
    cfg.test.trajectory_draws = 10;
    const VoxelSelection sel{{{1, 1, 1}, {2, 2, 1}}};
    const EvidenceMap m = run_group(subjects, mask, design, {}, {}, cfg, sel);
    CHECK(m.processed == 2);
    CHECK(m.at({1, 1, 1}) >= 0.0);
    CHECK(std::isnan(m.at({0, 0, 0})));
  }
  SUBCASE("sharp test needs a single subject") {
    GroupRunConfig cfg;
    cfg.test.mode = TestMode::SharpF;
    CHECK_THROWS_AS(run_group(subjects, mask, design, {}, {}, cfg), Error);
  }
}
