#ifndef VOXELFLOW_GROUP_HPP
#define VOXELFLOW_GROUP_HPP

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "voxelflow/individual.hpp"

namespace voxelflow {

struct SubjectPosterior {
  std::string id;
  std::string group;
  FilterState final_state;
  int coef = 0;
};

// Independent-subject combination of the per-subject normal summaries:
// mean is the average of subject means, covariance sum / n^2.
struct GroupPosterior {
  std::string group;
  PosteriorSummary summary;
  int subjects = 0;
};

// Throws EmptyGroup, InconsistentDims (q, p or coefficient differ).
GroupPosterior group_posterior(std::span<const SubjectPosterior> subjects, SummaryMode mode);
// Same combination starting from already summarized subjects.
GroupPosterior combine_summaries(std::span<const PosteriorSummary> summaries, const std::string& group = "");

TestResult group_test(const GroupPosterior& gp, int draws, Rng& rng);

// P(B - A > 0) with variances added; `flip` tests A - B instead.
TestResult group_compare(const GroupPosterior& a, const GroupPosterior& b, int draws, Rng& rng, bool flip = false);

// Per replicate: average the subject curves within each group, then take
// A - B (or A alone when `b` is empty). Throws MismatchedDraws, EmptyGroup.
TestResult group_trajectory_evidence(std::span<const TrajectoryDraws> a, std::span<const TrajectoryDraws> b,
                                     EvidenceRule rule = EvidenceRule::AllTimes);

struct Subject {
  std::string id;
  std::string group;
  Volume4D bold;
};

struct ManifestRow {
  std::filesystem::path path;
  std::string id;
  std::string group;
};

// CSV with columns path, subject id, group tag; relative paths resolve
// against the manifest's directory. A header line is skipped.
std::vector<ManifestRow> read_subject_manifest(const std::filesystem::path& manifest);

struct GroupRunConfig {
  TestConfig test;
  bool compare = false;
  std::string group_a = "A";
  std::string group_b = "B";
  bool flip = false;  // compare maps test B - A unless flipped
};

// Per voxel: filter every subject, combine, test. Single-group runs use all
// subjects. All subjects must share dims and frame count with the design.
EvidenceMap run_group(std::span<const Subject> subjects, const Mask3D& mask, const DesignMatrix& design,
                      const ModelSpec& spec, const PriorSpec& prior, const GroupRunConfig& config,
                      const VoxelSelection& selection = {});

}  // namespace voxelflow

#endif  // VOXELFLOW_GROUP_HPP
