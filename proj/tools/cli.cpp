#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "voxelflow/cluster.hpp"
#include "voxelflow/design.hpp"
#include "voxelflow/error.hpp"
#include "voxelflow/gp_anova.hpp"
#include "voxelflow/group.hpp"
#include "voxelflow/individual.hpp"
#include "voxelflow/mdlm.hpp"
#include "voxelflow/simulate.hpp"
#include "voxelflow/volume.hpp"

namespace voxelflow::cli {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

constexpr const char* kVersion = "0.1.0";

// A parameter value the user got wrong; reported as a usage error.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <class T>
std::vector<T> split_list(const std::string& text, const char* what) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    std::istringstream cs(cell);
    T v{};
    if (!(cs >> v) || !(cs >> std::ws).eof()) throw UsageError(std::string("bad value in --") + what + ": '" + cell + "'");
    out.push_back(v);
  }
  return out;
}

struct CommonOpts {
  int threads = 0;
  std::uint64_t seed = 1;
  std::string manifest;
  std::string config;
};

struct DesignOpts {
  std::string events;
  std::string block;  // "on,off" seconds
  double event_interval = 0.0;
  double tr = 0.0;
  int drift = 0;
  bool raw_regressor = false;
};

struct ModelOpts {
  double delta = 0.95;
  double obs_scale = 1.0;
  double c0 = 100.0;
  double s0 = 1.0;
  double n0 = 1.0;
};

struct TestOpts {
  std::string test = "marginal";
  std::string summary = "marginal";
  std::string rule = "all";
  int coef = 0;
  double radius = 1.0;
  int min_cluster = 1;
  int warmup = 30;
  int draws = 100;
  int joint_draws = 10000;
  std::string sharp = "0";
};

struct SimOpts {
  std::string dims = "16,16,16,120";
  std::string noise = "white";
  double rho = 0.0;
  double sd = 1.0;
  double baseline = 0.0;
  std::string box;
  double amplitude = 0.0;
};

void add_common(CLI::App* app, CommonOpts& o) {
  app->add_option("--config", o.config, "key = value file; keys are long option names, flags win")
      ->check(CLI::ExistingFile);
  app->add_option("--threads", o.threads, "worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  app->add_option("--seed", o.seed, "random seed");
  app->add_option("--manifest-out", o.manifest, "run manifest path (default <out>.manifest.json)");
}

void add_design(CLI::App* app, DesignOpts& o) {
  auto* ev = app->add_option("--design", o.events, "events CSV: onset,duration in seconds")->check(CLI::ExistingFile);
  auto* bl = app->add_option("--block", o.block, "block design: on,off seconds");
  auto* it = app->add_option("--event-interval", o.event_interval, "impulses every N seconds");
  ev->excludes(bl)->excludes(it);
  bl->excludes(it);
  app->add_option("--tr", o.tr, "repetition time in seconds (default: from the volume header)");
  app->add_option("--drift", o.drift, "orthogonal polynomial drift order")->check(CLI::NonNegativeNumber);
  app->add_flag("--raw-regressor", o.raw_regressor, "skip max-abs normalization of the convolved regressor");
}

void add_model(CLI::App* app, ModelOpts& o) {
  app->add_option("--delta", o.delta, "discount factor in (0.5, 1]")->check(CLI::Range(0.5, 1.0));
  app->add_option("--obs-scale", o.obs_scale, "observational scale V")->check(CLI::PositiveNumber);
  app->add_option("--c0", o.c0, "prior left variance scale")->check(CLI::PositiveNumber);
  app->add_option("--s0", o.s0, "prior right variance scale")->check(CLI::PositiveNumber);
  app->add_option("--n0", o.n0, "prior degrees of freedom")->check(CLI::Range(1.0, 1e9));
}

void add_test(CLI::App* app, TestOpts& o) {
  app->add_option("--test", o.test, "marginal|joint|average|sharp|trajectory")
      ->check(CLI::IsMember({"marginal", "joint", "average", "sharp", "trajectory"}));
  app->add_option("--summary", o.summary, "trajectory summary: marginal|joint|average")
      ->check(CLI::IsMember({"marginal", "joint", "average"}));
  app->add_option("--rule", o.rule, "trajectory evidence: all|per-time")->check(CLI::IsMember({"all", "per-time"}));
  app->add_option("--coef", o.coef, "coefficient tested (0 = BOLD regressor)")->check(CLI::NonNegativeNumber);
  app->add_option("--radius", o.radius, "neighborhood radius in voxels")->check(CLI::NonNegativeNumber);
  app->add_option("--min-cluster", o.min_cluster, "skip voxels whose cluster is smaller")->check(CLI::PositiveNumber);
  app->add_option("--warmup", o.warmup, "trajectory window start m")->check(CLI::PositiveNumber);
  app->add_option("--draws", o.draws, "trajectory replicates N")->check(CLI::PositiveNumber);
  app->add_option("--joint-draws", o.joint_draws, "Monte Carlo draws for orthant probabilities")
      ->check(CLI::PositiveNumber);
  app->add_option("--sharp-subset", o.sharp, "coefficients for the sharp test, comma separated");
}

void add_sim(CLI::App* app, SimOpts& o) {
  app->add_option("--dims", o.dims, "d1,d2,d3,T");
  app->add_option("--noise", o.noise, "white|ar1")->check(CLI::IsMember({"white", "ar1"}));
  app->add_option("--rho", o.rho, "AR(1) coefficient")->check(CLI::Range(-0.999999, 0.999999));
  app->add_option("--sd", o.sd, "noise standard deviation")->check(CLI::PositiveNumber);
  app->add_option("--baseline", o.baseline, "constant added to every series");
  app->add_option("--signal-box", o.box, "i0,j0,k0,i1,j1,k1 inclusive");
  app->add_option("--amplitude", o.amplitude, "signal amplitude times the regressor");
}

ModelSpec model_of(const ModelOpts& o) {
  ModelSpec m;
  m.discount = o.delta;
  m.obs_scale = o.obs_scale;
  return m;
}

PriorSpec prior_of(const ModelOpts& o) { return PriorSpec{o.c0, o.s0, o.n0}; }

TestConfig test_of(const TestOpts& o, const CommonOpts& c) {
  TestConfig t;
  t.mode = parse_test_mode(o.test);
  t.trajectory_summary = parse_summary_mode(o.summary);
  t.rule = parse_evidence_rule(o.rule);
  t.coef = o.coef;
  t.radius = o.radius;
  t.min_cluster = o.min_cluster;
  t.warmup = o.warmup;
  t.trajectory_draws = o.draws;
  t.joint_draws = o.joint_draws;
  t.sharp_subset = split_list<int>(o.sharp, "sharp-subset");
  t.seed = c.seed;
  t.threads = c.threads;
  return t;
}

double resolve_tr(const DesignOpts& o, double header_tr) {
  if (o.tr > 0.0) return o.tr;
  if (header_tr > 0.0) return header_tr;
  throw UsageError("no TR in the volume header; pass --tr");
}

std::vector<double> regressor_of(const DesignOpts& o, int frames, double tr, bool default_block) {
  StimulusTimeline f;
  if (!o.events.empty()) {
    f = rasterize(read_events_csv(o.events), frames, tr);
  } else if (!o.block.empty()) {
    const auto v = split_list<double>(o.block, "block");
    if (v.size() != 2) throw UsageError("--block expects on,off");
    f = block_stimulus(frames, tr, v[0], v[1]);
  } else if (o.event_interval > 0.0) {
    f = event_stimulus(frames, tr, o.event_interval);
  } else if (default_block) {
    f = block_stimulus(frames, tr, 30.0, 30.0);
  } else {
    throw UsageError("a design is required: --design, --block or --event-interval");
  }
  auto x = convolve(f, hrf_double_gamma(tr));
  return o.raw_regressor ? x : normalize_max_abs(std::move(x));
}

Dims3 dims_of(const std::vector<int>& d) { return Dims3{d[0], d[1], d[2]}; }

SimSpec sim_of(const SimOpts& o, const DesignOpts& d, const CommonOpts& c) {
  const auto dims = split_list<int>(o.dims, "dims");
  if (dims.size() != 4 || *std::min_element(dims.begin(), dims.end()) <= 0) {
    throw UsageError("--dims expects four positive integers d1,d2,d3,T");
  }
  SimSpec s;
  s.dims = dims_of(dims);
  s.frames = dims[3];
  s.tr = d.tr > 0.0 ? d.tr : 2.0;
  s.noise = o.noise == "ar1" ? NoiseModel::Ar1 : NoiseModel::White;
  s.rho = o.rho;
  s.sd = o.sd;
  s.baseline = o.baseline;
  s.seed = c.seed;
  if (!o.box.empty()) {
    const auto b = split_list<int>(o.box, "signal-box");
    if (b.size() != 6) throw UsageError("--signal-box expects i0,j0,k0,i1,j1,k1");
    s.signal_box = VoxelBox{Voxel{b[0], b[1], b[2]}, Voxel{b[3], b[4], b[5]}};
    s.amplitude = o.amplitude;
    s.regressor = regressor_of(d, s.frames, s.tr, true);
  }
  return s;
}

Mask3D load_mask(const std::string& path, const Dims3& dims) {
  const Mask3D mask = Mask3D::from_volume(read_volume(path));
  if (!(mask.dims() == dims)) throw Error(Errc::InconsistentDims, "mask grid differs from the BOLD grid");
  return mask;
}

// Voxels nonzero in every subject's first frame.
Mask3D intersect_masks(const std::vector<Subject>& subjects) {
  const Dims3 dims = subjects.front().bold.dims();
  std::vector<bool> flags(dims.count(), true);
  for (const auto& s : subjects) {
    const Mask3D m = Mask3D::from_volume(s.bold);
    for (std::size_t i = 0; i < flags.size(); ++i) flags[i] = flags[i] && m.flag(i);
  }
  return Mask3D(dims, std::move(flags));
}

json options_json(const CLI::App* app) {
  json out = json::object();
  for (const CLI::Option* opt : app->get_options()) {
    const auto& names = opt->get_lnames();
    if (names.empty() || names.front() == "help" || names.front() == "config") continue;
    if (opt->count() > 0) {
      const auto& r = opt->results();
      out[names.front()] = r.size() == 1 ? json(r.front()) : json(r);
    } else {
      out[names.front()] = opt->get_default_str();
    }
  }
  return out;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::IoFailure, "cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error(Errc::IoFailure, "write failed for " + path.string());
}

json map_summary(const EvidenceMap& map, double cutoff) {
  std::size_t above = 0;
  std::size_t finite = 0;
  double sum = 0.0;
  for (double v : map.values) {
    if (std::isnan(v)) continue;
    ++finite;
    sum += v;
    if (v > cutoff) ++above;
  }
  json failures = json::array();
  for (std::size_t n = 0; n < map.failures.size() && n < 20; ++n) {
    const Voxel v = map.dims.voxel(map.failures[n].index);
    failures.push_back({{"voxel", {v.i, v.j, v.k}}, {"error", map.failures[n].message}});
  }
  return {{"voxels_processed", map.processed},
          {"voxels_with_probability", finite},
          {"failures", map.failures.size()},
          {"first_failures", failures},
          {"mean_probability", finite ? sum / static_cast<double>(finite) : 0.0},
          {"above_0.95", above}};
}

json fpr_json(const std::vector<FprEntry>& entries) {
  json arr = json::array();
  for (const auto& e : entries) {
    arr.push_back({{"mode", std::string(to_string(e.mode))},
                   {"declared_active", e.declared},
                   {"evaluated", e.evaluated},
                   {"failures", e.failures},
                   {"fpr", e.fpr}});
  }
  return arr;
}

struct Outcome {
  fs::path out;
  json summary;
};

// Subcommand bodies. Each returns where it wrote and a summary block.

Outcome run_individual_cmd(const std::string& bold_path, const std::string& mask_path, const std::string& out,
                           const DesignOpts& d, const ModelOpts& m, const TestOpts& t, const CommonOpts& c) {
  const Volume4D bold = read_volume(bold_path);
  const Mask3D mask = mask_path.empty() ? Mask3D::from_volume(bold) : load_mask(mask_path, bold.dims());
  const double tr = resolve_tr(d, bold.time_step());
  const DesignMatrix design = build_design(regressor_of(d, bold.frames(), tr, false), d.drift);
  const EvidenceMap map = run_individual(bold, mask, design, model_of(m), prior_of(m), test_of(t, c));
  write_volume(map.to_volume(), out);
  return {out, map_summary(map, 0.95)};
}

Outcome run_group_cmd(const std::string& manifest, const std::string& mask_path, const std::string& out, bool compare,
                      const std::string& groups, bool flip, const DesignOpts& d, const ModelOpts& m, const TestOpts& t,
                      const CommonOpts& c) {
  std::vector<Subject> subjects;
  for (const auto& row : read_subject_manifest(manifest)) subjects.push_back({row.id, row.group, read_volume(row.path)});
  GroupRunConfig gc;
  gc.test = test_of(t, c);
  gc.compare = compare;
  gc.flip = flip;
  if (compare) {
    std::vector<std::string> names;
    std::stringstream ss(groups);
    for (std::string g; std::getline(ss, g, ',');) names.push_back(g);
    if (names.size() != 2 || names[0].empty() || names[1].empty()) throw UsageError("--groups expects A,B");
    gc.group_a = names[0];
    gc.group_b = names[1];
  } else if (!groups.empty()) {
    std::vector<Subject> keep;
    for (auto& s : subjects) {
      if (s.group == groups) keep.push_back(std::move(s));
    }
    if (keep.empty()) throw Error(Errc::EmptyGroup, "no subjects tagged '" + groups + "'");
    subjects = std::move(keep);
  }
  const Volume4D& first = subjects.front().bold;
  const Mask3D mask = mask_path.empty() ? intersect_masks(subjects) : load_mask(mask_path, first.dims());
  const double tr = resolve_tr(d, first.time_step());
  const DesignMatrix design = build_design(regressor_of(d, first.frames(), tr, false), d.drift);
  const EvidenceMap map = run_group(subjects, mask, design, model_of(m), prior_of(m), gc);
  write_volume(map.to_volume(), out);
  json summary = map_summary(map, 0.95);
  summary["subjects"] = subjects.size();
  return {out, summary};
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

// Appends "--key value" for every line of the --config file whose key was not
// given on the command line. Unknown keys then fail in the parser.
void expand_config(std::vector<std::string>& args) {
  std::string path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return;
  std::ifstream in(path);
  if (!in) return;  // the option's own ExistingFile check reports it
  auto given = [&](const std::string& flag) {
    for (const auto& a : args) {
      if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
    }
    return false;
  };
  std::vector<std::string> extra;
  std::string line;
  for (int n = 1; std::getline(in, line); ++n) {
    line = trim(line.substr(0, line.find('#')));
    if (line.empty() || line.front() == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(path + ":" + std::to_string(n) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') && value.back() == value.front()) {
      value = value.substr(1, value.size() - 2);
    }
    const std::string flag = "--" + key;
    if (given(flag)) continue;
    if (value == "true") {
      extra.push_back(flag);
    } else if (value != "false") {
      extra.push_back(flag);
      extra.push_back(value);
    }
  }
  args.insert(args.end(), extra.begin(), extra.end());
}

int dispatch(CLI::App& app, int argc, const char* const* argv) {
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  app.option_defaults()->always_capture_default();

  CommonOpts common;
  DesignOpts design;
  ModelOpts model;
  TestOpts test;
  SimOpts sim;
  std::string bold, mask, out, manifest, groups, curves_a, curves_b, variant = "as-printed", truth_out, modes =
      "marginal,joint,average";
  bool flip = false;
  int iters = 20000, burnin = 5000, thin = 10, group_subjects = 0;
  double cutoff = 0.95;

  auto* ind = app.add_subcommand("individual", "per-voxel activation map for one subject");
  add_common(ind, common);
  ind->add_option("--bold", bold, "4D BOLD volume (.nii or .raw)")->required()->check(CLI::ExistingFile);
  ind->add_option("--mask", mask, "mask volume; default: nonzero voxels of the first frame")->check(CLI::ExistingFile);
  ind->add_option("--out", out, "probability map")->required();
  add_design(ind, design);
  add_model(ind, model);
  add_test(ind, test);

  auto* grp = app.add_subcommand("group", "single-group activation map");
  add_common(grp, common);
  grp->add_option("--manifest", manifest, "subjects CSV: path,id,group")->required()->check(CLI::ExistingFile);
  grp->add_option("--group", groups, "only subjects with this tag (default: all)");
  grp->add_option("--mask", mask, "mask volume; default: voxels nonzero in every subject")->check(CLI::ExistingFile);
  grp->add_option("--out", out, "probability map")->required();
  add_design(grp, design);
  add_model(grp, model);
  add_test(grp, test);

  auto* cmp = app.add_subcommand("compare", "two-group comparison map, P(B - A > 0)");
  add_common(cmp, common);
  cmp->add_option("--manifest", manifest, "subjects CSV: path,id,group")->required()->check(CLI::ExistingFile);
  cmp->add_option("--groups", groups, "group tags A,B")->default_val("A,B");
  cmp->add_flag("--flip", flip, "test A - B instead");
  cmp->add_option("--mask", mask, "mask volume; default: voxels nonzero in every subject")->check(CLI::ExistingFile);
  cmp->add_option("--out", out, "probability map")->required();
  add_design(cmp, design);
  add_model(cmp, model);
  add_test(cmp, test);

  auto* gp = app.add_subcommand("gp-anova", "functional ANOVA of two curve batches");
  add_common(gp, common);
  gp->add_option("--curves-a", curves_a, "CSV, one curve per row")->required()->check(CLI::ExistingFile);
  gp->add_option("--curves-b", curves_b, "CSV, one curve per row")->required()->check(CLI::ExistingFile);
  gp->add_option("--iters", iters, "iterations")->check(CLI::PositiveNumber);
  gp->add_option("--burnin", burnin, "burn-in iterations")->check(CLI::NonNegativeNumber);
  gp->add_option("--thin", thin, "thinning")->check(CLI::PositiveNumber);
  gp->add_option("--variant", variant, "as-printed|derived")->check(CLI::IsMember({"as-printed", "derived"}));
  gp->add_option("--out", out, "report JSON")->required();

  auto* simc = app.add_subcommand("simulate", "synthetic BOLD volume");
  add_common(simc, common);
  add_sim(simc, sim);
  add_design(simc, design);
  simc->add_option("--out", out, "output volume")->required();
  simc->add_option("--truth-out", truth_out, "signal mask volume");

  auto* val = app.add_subcommand("validate", "false-positive rate on simulated null data");
  add_common(val, common);
  add_sim(val, sim);
  add_design(val, design);
  add_model(val, model);
  add_test(val, test);
  val->add_option("--modes", modes, "tests to run, comma separated");
  val->add_option("--cutoff", cutoff, "activation cutoff")->check(CLI::Range(0.0, 1.0));
  val->add_option("--group-subjects", group_subjects, "also run the group test over this many subjects")
      ->check(CLI::NonNegativeNumber);
  val->add_option("--out", out, "report JSON")->required();

  std::vector<std::string> args(argv, argv + argc);
  expand_config(args);
  std::vector<const char*> expanded;
  for (const auto& a : args) expanded.push_back(a.c_str());
  app.parse(static_cast<int>(expanded.size()), expanded.data());

  const auto start = std::chrono::steady_clock::now();
  CLI::App* sub = app.get_subcommands().front();
  json extra = json::object();
  Outcome outcome;

  if (sub == ind) {
    outcome = run_individual_cmd(bold, mask, out, design, model, test, common);
  } else if (sub == grp) {
    outcome = run_group_cmd(manifest, mask, out, false, groups, false, design, model, test, common);
  } else if (sub == cmp) {
    outcome = run_group_cmd(manifest, mask, out, true, groups, flip, design, model, test, common);
  } else if (sub == gp) {
    const CurveBatch a = read_curves_csv(curves_a, "A");
    const CurveBatch b = read_curves_csv(curves_b, "B");
    if (burnin >= iters) throw UsageError("--burnin must be smaller than --iters");
    GpAnovaConfig cfg;
    cfg.iterations = iters;
    cfg.burn_in = burnin;
    cfg.thin = thin;
    cfg.variant = parse_variant(variant);
    Rng rng(common.seed);
    const GpAnovaChain chain = run_sampler(a, b, cfg, rng);
    const auto prob = test_alpha_diff(chain);
    double phi = 0.0;
    std::array<double, 3> s2{0, 0, 0}, tau{0, 0, 0};
    for (const auto& s : chain.samples) {
      phi += s.phi;
      for (int c = 0; c < 3; ++c) {
        s2[c] += s.sigma2[c];
        tau[c] += s.tau[c];
      }
    }
    const double n = static_cast<double>(chain.samples.size());
    const auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    const json report = {
        {"probabilities", prob},
        {"alpha_a_mean", vec(chain.alpha_mean)},
        {"mu_mean", vec(chain.mu_mean)},
        {"posterior_means",
         {{"phi", phi / n},
          {"sigma2_eps", s2[kEps] / n},
          {"sigma2_mu", s2[kMu] / n},
          {"sigma2_alpha", s2[kAlpha] / n},
          {"tau_eps", tau[kEps] / n},
          {"tau_mu", tau[kMu] / n},
          {"tau_alpha", tau[kAlpha] / n}}},
        {"acceptance", {{"tau_eps", chain.acceptance[kEps]}, {"tau_mu", chain.acceptance[kMu]}, {"tau_alpha", chain.acceptance[kAlpha]}}},
        {"step", {{"tau_eps", chain.step[kEps]}, {"tau_mu", chain.step[kMu]}, {"tau_alpha", chain.step[kAlpha]}}},
        {"boxes",
         {{"sigma2", {chain.config.sigma2.lo, chain.config.sigma2.hi}},
          {"tau", {chain.config.tau.lo, chain.config.tau.hi}},
          {"phi", {chain.config.phi.lo, chain.config.phi.hi}}}},
        {"samples", chain.samples.size()},
        {"curves", {{"a", a.count()}, {"b", b.count()}, {"points", a.points()}}},
        {"variant", variant}};
    write_json(out, report);
    outcome = {out, {{"samples", chain.samples.size()}}};
  } else if (sub == simc) {
    const SimSpec spec = sim_of(sim, design, common);
    const SimResult res = simulate(spec);
    write_volume(res.bold, out);
    if (!truth_out.empty()) {
      std::vector<double> flags(spec.dims.count());
      for (std::size_t i = 0; i < flags.size(); ++i) flags[i] = res.truth.flag(i) ? 1.0 : 0.0;
      write_volume(Volume4D(spec.dims, 1, std::move(flags), spec.tr), truth_out);
      extra["truth"] = truth_out;
    }
    outcome = {out, {{"voxels", spec.dims.count()}, {"frames", spec.frames}, {"signal_voxels", res.truth.count()}}};
  } else if (sub == val) {
    SimSpec spec = sim_of(sim, design, common);
    const DesignMatrix dm = build_design(regressor_of(design, spec.frames, spec.tr, true), design.drift);
    ValidationConfig vc;
    vc.test = test_of(test, common);
    vc.cutoff = cutoff;
    vc.group_subjects = group_subjects;
    vc.modes.clear();
    std::stringstream ss(modes);
    for (std::string name; std::getline(ss, name, ',');) vc.modes.push_back(parse_test_mode(name));
    const FprReport rep = validate_fpr(spec, dm, model_of(model), prior_of(model), vc);
    const json report = {{"total", rep.total},
                         {"cutoff", rep.cutoff},
                         {"individual", fpr_json(rep.individual)},
                         {"group", fpr_json(rep.group)},
                         {"group_subjects", rep.group_subjects},
                         {"config", options_json(sub)}};
    write_json(out, report);
    outcome = {out, {{"total", rep.total}}};
  }

  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  json argv_json = json::array();
  for (int i = 0; i < argc; ++i) argv_json.push_back(argv[i]);
  json manifest_json = {{"tool", "voxelflow"},
                        {"version", kVersion},
                        {"command", sub->get_name()},
                        {"argv", argv_json},
                        {"config", options_json(sub)},
                        {"seed", common.seed},
                        {"threads", common.threads},
                        {"output", outcome.out.string()},
                        {"summary", outcome.summary},
                        {"extra_outputs", extra},
                        {"elapsed_seconds", elapsed}};
  const fs::path manifest_path = common.manifest.empty() ? fs::path(outcome.out.string() + ".manifest.json") : fs::path(common.manifest);
  write_json(manifest_path, manifest_json);
  return kExitOk;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"Bayesian voxel-wise fMRI activation analysis", "voxelflow"};
  try {
    return dispatch(app, argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
}

int cli_main(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  return cli_main(static_cast<int>(argv.size()), argv.data());
}

}  // namespace voxelflow::cli
