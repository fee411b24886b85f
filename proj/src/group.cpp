#include "voxelflow/group.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>

#include "voxelflow/error.hpp"
#include "voxelflow/parallel.hpp"

namespace voxelflow {

namespace {

// Stream word for the combination stage, distinct from subject indices.
constexpr std::uint64_t kCombineStream = 0xC0B1'7E00ull;

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

Eigen::MatrixXd average_curves(std::span<const TrajectoryDraws> draws, Eigen::Index n, Eigen::Index w, int start) {
  Eigen::MatrixXd avg = Eigen::MatrixXd::Zero(n, w);
  for (const auto& d : draws) {
    if (d.values.rows() != n || d.values.cols() != w || d.window_start != start) {
      throw Error(Errc::MismatchedDraws, "subjects differ in replicate count or window");
    }
    avg += d.values;
  }
  return avg / static_cast<double>(draws.size());
}

}  // namespace

GroupPosterior combine_summaries(std::span<const PosteriorSummary> summaries, const std::string& group) {
  if (summaries.empty()) throw Error(Errc::EmptyGroup, "group '" + group + "' has no subjects");
  const auto& first = summaries.front();
  GroupPosterior gp;
  gp.group = group;
  gp.subjects = static_cast<int>(summaries.size());
  gp.summary.mode = first.mode;
  gp.summary.coef = first.coef;
  gp.summary.t = first.t;
  gp.summary.mean = Eigen::VectorXd::Zero(first.mean.size());
  gp.summary.cov = Eigen::MatrixXd::Zero(first.cov.rows(), first.cov.cols());
  for (const auto& s : summaries) {
    if (s.mode != first.mode || s.coef != first.coef || s.mean.size() != first.mean.size()) {
      throw Error(Errc::InconsistentDims, "subjects differ in cluster size, coefficient or mode");
    }
    gp.summary.mean += s.mean;
    gp.summary.cov += s.cov;
  }
  const double n = static_cast<double>(summaries.size());
  gp.summary.mean /= n;
  gp.summary.cov /= n * n;
  return gp;
}

GroupPosterior group_posterior(std::span<const SubjectPosterior> subjects, SummaryMode mode) {
  if (subjects.empty()) throw Error(Errc::EmptyGroup, "no subjects");
  std::vector<PosteriorSummary> summaries;
  summaries.reserve(subjects.size());
  const auto& first = subjects.front();
  for (const auto& s : subjects) {
    if (s.final_state.q() != first.final_state.q() || s.final_state.p() != first.final_state.p() ||
        s.coef != first.coef) {
      throw Error(Errc::InconsistentDims, "subject " + s.id + " differs in q, p or coefficient");
    }
    summaries.push_back(summarize(s.final_state, s.coef, mode));
  }
  return combine_summaries(summaries, first.group);
}

TestResult group_test(const GroupPosterior& gp, int draws, Rng& rng) { return summary_probability(gp.summary, draws, rng); }

TestResult group_compare(const GroupPosterior& a, const GroupPosterior& b, int draws, Rng& rng, bool flip) {
  if (a.summary.mode != b.summary.mode || a.summary.mean.size() != b.summary.mean.size()) {
    throw Error(Errc::InconsistentDims, "groups differ in mode or cluster size");
  }
  PosteriorSummary diff = b.summary;
  diff.mean = flip ? (a.summary.mean - b.summary.mean).eval() : (b.summary.mean - a.summary.mean).eval();
  diff.cov = a.summary.cov + b.summary.cov;
  return summary_probability(diff, draws, rng);
}

TestResult group_trajectory_evidence(std::span<const TrajectoryDraws> a, std::span<const TrajectoryDraws> b,
                                     EvidenceRule rule) {
  if (a.empty()) throw Error(Errc::EmptyGroup, "group A has no trajectory draws");
  const Eigen::Index n = a.front().values.rows();
  const Eigen::Index w = a.front().values.cols();
  const int start = a.front().window_start;
  TrajectoryDraws combined;
  combined.window_start = start;
  combined.values = average_curves(a, n, w, start);
  if (!b.empty()) combined.values -= average_curves(b, n, w, start);
  return evidence_from_trajectories(combined, rule);
}

std::vector<ManifestRow> read_subject_manifest(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw Error(Errc::IoFailure, "cannot open manifest " + manifest.string());
  std::vector<ManifestRow> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    const bool header = first && !cells.empty() && (cells[0] == "path" || cells[0] == "file");
    first = false;
    if (header) continue;
    if (cells.size() < 3 || cells[0].empty()) throw Error(Errc::InvalidParam, "manifest row needs path,id,group: " + line);
    std::filesystem::path p(cells[0]);
    if (p.is_relative()) p = manifest.parent_path() / p;
    rows.push_back({p, cells[1], cells[2]});
  }
  if (rows.empty()) throw Error(Errc::EmptyGroup, "manifest lists no subjects");
  return rows;
}

EvidenceMap run_group(std::span<const Subject> subjects, const Mask3D& mask, const DesignMatrix& design,
                      const ModelSpec& spec, const PriorSpec& prior, const GroupRunConfig& config,
                      const VoxelSelection& selection) {
  if (subjects.empty()) throw Error(Errc::EmptyGroup, "no subjects");
  const Dims3 dims = mask.dims();
  for (const auto& s : subjects) {
    if (!(s.bold.dims() == dims)) throw Error(Errc::InconsistentDims, "subject " + s.id + " grid differs from the mask");
    if (s.bold.frames() != design.frames()) {
      throw Error(Errc::DimensionMismatch, "subject " + s.id + " has " + std::to_string(s.bold.frames()) +
                                               " frames, design has " + std::to_string(design.frames()));
    }
  }
  spec.validate(design.p());
  const TestConfig& tc = config.test;
  if (tc.coef < 0 || tc.coef >= design.p()) throw Error(Errc::IndexOutOfRange, "coefficient outside the design");
  if (tc.mode == TestMode::SharpF && subjects.size() != 1) {
    throw Error(Errc::InvalidParam, "the sharp test is defined for a single subject");
  }

  // Group membership: index lists into `subjects`.
  std::vector<std::size_t> in_a, in_b;
  for (std::size_t s = 0; s < subjects.size(); ++s) {
    if (!config.compare || subjects[s].group == config.group_a) in_a.push_back(s);
    else if (subjects[s].group == config.group_b) in_b.push_back(s);
  }
  if (in_a.empty()) throw Error(Errc::EmptyGroup, "group '" + config.group_a + "' has no subjects");
  if (config.compare && in_b.empty()) throw Error(Errc::EmptyGroup, "group '" + config.group_b + "' has no subjects");

  std::vector<std::size_t> targets;
  if (selection.voxels.empty()) {
    for (std::size_t idx = 0; idx < dims.count(); ++idx) {
      if (mask.flag(idx)) targets.push_back(idx);
    }
  } else {
    for (const auto& v : selection.voxels) {
      if (!mask.contains(v)) throw Error(Errc::CenterMasked, "selected voxel is outside the mask");
      targets.push_back(dims.index(v));
    }
  }

  EvidenceMap map;
  map.dims = dims;
  map.values.assign(dims.count(), std::numeric_limits<double>::quiet_NaN());
  std::vector<std::string> errors(targets.size());
  const SummaryMode summary_mode = tc.mode == TestMode::Joint     ? SummaryMode::Joint
                                   : tc.mode == TestMode::Average ? SummaryMode::Average
                                   : tc.mode == TestMode::Trajectory ? tc.trajectory_summary
                                                                     : SummaryMode::Marginal;

  parallel_for(targets.size(), tc.threads, [&](std::size_t n) {
    const std::size_t idx = targets[n];
    const Voxel center = dims.voxel(idx);
    try {
      const Neighborhood nb = build_neighborhood(center, tc.radius, dims, mask);
      if (nb.q() < tc.min_cluster) {
        errors[n] = "cluster size " + std::to_string(nb.q()) + " below minimum " + std::to_string(tc.min_cluster);
        return;
      }
      Rng combine_rng(tc.seed, {idx, kCombineStream});
      if (tc.mode == TestMode::Trajectory) {
        std::vector<TrajectoryDraws> a, b;
        for (std::size_t s = 0; s < subjects.size(); ++s) {
          const bool is_a = std::find(in_a.begin(), in_a.end(), s) != in_a.end();
          const bool is_b = std::find(in_b.begin(), in_b.end(), s) != in_b.end();
          if (!is_a && !is_b) continue;
          const FilterTrajectory run = filter_run(cluster_series(subjects[s].bold, nb), design, spec, prior);
          Rng rng(tc.seed, {idx, s});
          auto draws = simulate_trajectories(run, design, spec, prior, tc.trajectory_summary, tc.coef, tc.warmup,
                                             tc.trajectory_draws, rng);
          (is_a ? a : b).push_back(std::move(draws));
        }
        // Maps report B - A like the closed-form comparison.
        const bool b_minus_a = config.compare && !config.flip;
        const auto r = b_minus_a ? group_trajectory_evidence(b, a, tc.rule) : group_trajectory_evidence(a, b, tc.rule);
        map.values[idx] = r.probability;
        return;
      }
      if (tc.mode == TestMode::SharpF) {
        const FilterTrajectory run = filter_run(cluster_series(subjects[0].bold, nb), design, spec, prior);
        map.values[idx] = sharp_f_evidence(run.final_state(), tc.sharp_subset).probability;
        return;
      }
      std::vector<PosteriorSummary> sa, sb;
      for (std::size_t s = 0; s < subjects.size(); ++s) {
        const bool is_a = std::find(in_a.begin(), in_a.end(), s) != in_a.end();
        const bool is_b = std::find(in_b.begin(), in_b.end(), s) != in_b.end();
        if (!is_a && !is_b) continue;
        const FilterTrajectory run = filter_run(cluster_series(subjects[s].bold, nb), design, spec, prior);
        (is_a ? sa : sb).push_back(summarize(run.final_state(), tc.coef, summary_mode));
      }
      const GroupPosterior ga = combine_summaries(sa, config.group_a);
      if (config.compare) {
        const GroupPosterior gb = combine_summaries(sb, config.group_b);
        map.values[idx] = group_compare(ga, gb, tc.joint_draws, combine_rng, config.flip).probability;
      } else {
        map.values[idx] = group_test(ga, tc.joint_draws, combine_rng).probability;
      }
    } catch (const Error& e) {
      errors[n] = e.what();
    }
  });

  map.processed = targets.size();
  for (std::size_t n = 0; n < targets.size(); ++n) {
    if (!errors[n].empty()) map.failures.push_back({targets[n], errors[n]});
  }
  return map;
}

EvidenceMap run_individual(const Volume4D& bold, const Mask3D& mask, const DesignMatrix& design, const ModelSpec& spec,
                           const PriorSpec& prior, const TestConfig& config, const VoxelSelection& selection) {
  const Subject subject{"subject", "A", bold};
  GroupRunConfig gc;
  gc.test = config;
  return run_group(std::span<const Subject>(&subject, 1), mask, design, spec, prior, gc, selection);
}

}  // namespace voxelflow
