#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "voxelflow/cluster.hpp"
#include "voxelflow/design.hpp"
#include "voxelflow/error.hpp"
#include "voxelflow/gp_anova.hpp"
#include "voxelflow/group.hpp"
#include "voxelflow/individual.hpp"
#include "voxelflow/mdlm.hpp"
#include "voxelflow/simulate.hpp"
#include "voxelflow/volume.hpp"

namespace py = pybind11;
using namespace voxelflow;

namespace {

using Array = py::array_t<double, py::array::forcecast>;

// Arrays cross the boundary as (d1, d2, d3, T) indexed [i, j, k, t]; a 3D
// array is a single frame.
Volume4D to_volume(const Array& a, double tr, NonFinite policy = NonFinite::Reject) {
  if (a.ndim() != 3 && a.ndim() != 4) throw Error(Errc::InvalidParam, "expected a 3D or 4D array");
  const Dims3 d{static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), static_cast<int>(a.shape(2))};
  const int T = a.ndim() == 4 ? static_cast<int>(a.shape(3)) : 1;
  std::vector<double> data(d.count() * T);
  const auto* base = reinterpret_cast<const char*>(a.data());
  for (int k = 0; k < d.d3; ++k)
    for (int j = 0; j < d.d2; ++j)
      for (int i = 0; i < d.d1; ++i)
        for (int t = 0; t < T; ++t) {
          std::ptrdiff_t off = i * a.strides(0) + j * a.strides(1) + k * a.strides(2);
          if (a.ndim() == 4) off += t * a.strides(3);
          data[d.index({i, j, k}) * T + t] = *reinterpret_cast<const double*>(base + off);
        }
  return Volume4D(d, T, std::move(data), tr, policy);
}

py::array_t<double> from_volume(const Volume4D& v) {
  const Dims3& d = v.dims();
  const auto T = static_cast<py::ssize_t>(v.frames());
  const auto s = static_cast<py::ssize_t>(sizeof(double));
  py::array_t<double> out({static_cast<py::ssize_t>(d.d1), static_cast<py::ssize_t>(d.d2),
                           static_cast<py::ssize_t>(d.d3), T},
                          {s * T, s * T * d.d1, s * T * d.d1 * d.d2, s});
  std::copy(v.data().begin(), v.data().end(), out.mutable_data());
  return out;
}

py::array_t<double> map_array(const EvidenceMap& m) {
  py::array_t<double> full = from_volume(m.to_volume());
  return full.attr("reshape")(py::make_tuple(m.dims.d1, m.dims.d2, m.dims.d3)).cast<py::array_t<double>>();
}

Mask3D to_mask(const std::optional<Array>& mask, const Dims3& dims) {
  if (!mask) return Mask3D::full(dims);
  const Volume4D v = to_volume(*mask, 0.0);
  if (!(v.dims() == dims)) throw Error(Errc::DimensionMismatch, "mask dims differ from the volume");
  std::vector<bool> flags(dims.count());
  for (std::size_t n = 0; n < flags.size(); ++n) flags[n] = v.data()[n * v.frames()] != 0.0;
  return Mask3D(dims, std::move(flags));
}

DesignMatrix to_design(const Eigen::MatrixXd& rows) {
  DesignMatrix d;
  d.rows = rows;
  return d;
}

ModelSpec model_of(double discount, double obs_scale) {
  ModelSpec m;
  m.discount = discount;
  m.obs_scale = obs_scale;
  return m;
}

py::dict state_dict(const FilterState& s) {
  py::dict d;
  d["t"] = s.t;
  d["dof"] = s.dof;
  d["mean"] = s.mean;
  d["left"] = s.left;
  d["right"] = s.right;
  return d;
}

FilterState state_of(const py::dict& d) {
  FilterState s;
  s.t = d["t"].cast<int>();
  s.dof = d["dof"].cast<double>();
  s.mean = d["mean"].cast<Eigen::MatrixXd>();
  s.left = d["left"].cast<Eigen::MatrixXd>();
  s.right = d["right"].cast<Eigen::MatrixXd>();
  return s;
}

py::dict result_dict(const TestResult& r) {
  py::dict d;
  d["mode"] = std::string(to_string(r.mode));
  d["probability"] = r.probability;
  d["mc_se"] = r.mc_se ? py::cast(*r.mc_se) : py::none();
  d["mean_summary"] = r.mean_summary;
  d["var_summary"] = r.var_summary;
  d["t_start"] = r.t_start;
  d["t_end"] = r.t_end;
  return d;
}

TestConfig test_config(const std::string& test, const std::string& summary, const std::string& rule, int coef,
                       double radius, int min_cluster, int warmup, int draws, int joint_draws,
                       const std::vector<int>& sharp_subset, std::uint64_t seed, int threads) {
  TestConfig c;
  c.mode = parse_test_mode(test);
  c.trajectory_summary = parse_summary_mode(summary);
  c.rule = parse_evidence_rule(rule);
  c.coef = coef;
  c.radius = radius;
  c.min_cluster = min_cluster;
  c.warmup = warmup;
  c.trajectory_draws = draws;
  c.joint_draws = joint_draws;
  c.sharp_subset = sharp_subset;
  c.seed = seed;
  c.threads = threads;
  return c;
}

py::dict map_result(const EvidenceMap& m) {
  py::dict d;
  d["map"] = map_array(m);
  d["processed"] = m.processed;
  py::list failures;
  for (const auto& f : m.failures) {
    const Voxel v = m.dims.voxel(f.index);
    failures.append(py::make_tuple(py::make_tuple(v.i, v.j, v.k), f.message));
  }
  d["failures"] = failures;
  return d;
}

py::list fpr_list(const std::vector<FprEntry>& entries) {
  py::list out;
  for (const auto& e : entries) {
    py::dict d;
    d["mode"] = std::string(to_string(e.mode));
    d["declared_active"] = e.declared;
    d["evaluated"] = e.evaluated;
    d["failures"] = e.failures;
    d["fpr"] = e.fpr;
    out.append(d);
  }
  return out;
}

SimSpec sim_spec(const std::vector<int>& dims, double tr, const std::string& noise, double rho, double sd,
                 double baseline, const std::optional<std::vector<int>>& box, double amplitude,
                 const std::vector<double>& regressor, std::uint64_t seed, std::uint64_t subject) {
  if (dims.size() != 4) throw Error(Errc::InvalidParam, "dims must be (d1, d2, d3, T)");
  SimSpec s;
  s.dims = {dims[0], dims[1], dims[2]};
  s.frames = dims[3];
  s.tr = tr;
  if (noise == "white") s.noise = NoiseModel::White;
  else if (noise == "ar1") s.noise = NoiseModel::Ar1;
  else throw Error(Errc::InvalidParam, "noise must be 'white' or 'ar1'");
  s.rho = rho;
  s.sd = sd;
  s.baseline = baseline;
  if (box) {
    if (box->size() != 6) throw Error(Errc::InvalidParam, "signal box needs six corners i0,j0,k0,i1,j1,k1");
    const auto& b = *box;
    s.signal_box = VoxelBox{{b[0], b[1], b[2]}, {b[3], b[4], b[5]}};
  }
  s.amplitude = amplitude;
  s.regressor = regressor;
  s.seed = seed;
  s.subject = subject;
  return s;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Bayesian voxel-wise fMRI analysis";

  static py::exception<Error> exc(m, "VoxelflowError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object err = exc;
      py::object instance = err(e.what());
      instance.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(exc.ptr(), instance.ptr());
    }
  });

  m.def(
      "read_volume",
      [](const std::string& path, bool allow_nan) {
        const Volume4D v = read_volume(path, allow_nan ? NonFinite::Allow : NonFinite::Reject);
        return py::make_tuple(from_volume(v), v.time_step());
      },
      py::arg("path"), py::arg("allow_nan") = false, "Returns (array[d1, d2, d3, T], TR).");
  m.def(
      "write_volume",
      [](const Array& a, const std::string& path, double tr) { write_volume(to_volume(a, tr, NonFinite::Allow), path); },
      py::arg("array"), py::arg("path"), py::arg("tr") = 0.0);

  m.def(
      "hrf",
      [](double tr, double peak_delay, double undershoot_delay, double ratio, double length) {
        HrfParams p;
        p.peak_delay = peak_delay;
        p.undershoot_delay = undershoot_delay;
        p.ratio = ratio;
        p.length = length;
        return hrf_double_gamma(tr, p).kernel;
      },
      py::arg("tr"), py::arg("peak_delay") = 6.0, py::arg("undershoot_delay") = 16.0, py::arg("ratio") = 1.0 / 6.0,
      py::arg("length") = 32.0);
  m.def(
      "block_regressor",
      [](int frames, double tr, double on, double off, bool normalize) {
        auto x = convolve(block_stimulus(frames, tr, on, off), hrf_double_gamma(tr));
        return normalize ? normalize_max_abs(std::move(x)) : x;
      },
      py::arg("frames"), py::arg("tr"), py::arg("on") = 30.0, py::arg("off") = 30.0, py::arg("normalize") = true,
      "Block stimulus convolved with the default double-gamma HRF.");
  m.def(
      "convolve",
      [](const std::vector<double>& f, const std::vector<double>& kernel) {
        Hrf h;
        h.kernel = kernel;
        return convolve(StimulusTimeline{f, StimulusKind::Custom}, h);
      },
      py::arg("stimulus"), py::arg("kernel"));
  m.def(
      "build_design", [](const std::vector<double>& x, int drift) { return build_design(x, drift).rows; },
      py::arg("regressor"), py::arg("drift") = 0, "T x p design: regressor, intercept, drift columns.");

  m.def(
      "filter_run",
      [](const Eigen::MatrixXd& series, const Eigen::MatrixXd& design, double discount, double obs_scale, double c0,
         double s0, double n0, bool all_states) -> py::object {
        const FilterTrajectory run =
            filter_run(series, to_design(design), model_of(discount, obs_scale), PriorSpec{c0, s0, n0});
        if (!all_states) return state_dict(run.final_state());
        py::list states;
        for (const auto& s : run.states) states.append(state_dict(s));
        return states;
      },
      py::arg("series"), py::arg("design"), py::arg("discount") = 0.95, py::arg("obs_scale") = 1.0,
      py::arg("c0") = 100.0, py::arg("s0") = 1.0, py::arg("n0") = 1.0, py::arg("all_states") = false,
      "series is q x T, design T x p. Returns the final state dict (t, dof, mean, left, right).");

  m.def(
      "test_marginal", [](const py::dict& s, int coef) { return result_dict(test_marginal(state_of(s), coef)); },
      py::arg("state"), py::arg("coef") = 0);
  m.def(
      "test_average", [](const py::dict& s, int coef) { return result_dict(test_average(state_of(s), coef)); },
      py::arg("state"), py::arg("coef") = 0);
  m.def(
      "test_joint",
      [](const py::dict& s, int coef, int draws, std::uint64_t seed) {
        Rng rng(seed);
        return result_dict(test_joint(state_of(s), coef, draws, rng));
      },
      py::arg("state"), py::arg("coef") = 0, py::arg("draws") = 10000, py::arg("seed") = 1);
  m.def(
      "sharp_f_evidence",
      [](const py::dict& s, const std::vector<int>& subset, int column) {
        return result_dict(sharp_f_evidence(state_of(s), subset, column));
      },
      py::arg("state"), py::arg("subset") = std::vector<int>{0}, py::arg("column") = 0);

  m.def(
      "run_individual",
      [](const Array& bold, const std::optional<Array>& mask, const Eigen::MatrixXd& design, const std::string& test,
         const std::string& summary, const std::string& rule, int coef, double radius, int min_cluster, int warmup,
         int draws, int joint_draws, const std::vector<int>& sharp_subset, double discount, double obs_scale,
         double c0, double s0, double n0, std::uint64_t seed, int threads) {
        const Volume4D vol = to_volume(bold, 0.0);
        const TestConfig tc = test_config(test, summary, rule, coef, radius, min_cluster, warmup, draws, joint_draws,
                                          sharp_subset, seed, threads);
        EvidenceMap map;
        {
          py::gil_scoped_release release;
          map = run_individual(vol, to_mask(mask, vol.dims()), to_design(design), model_of(discount, obs_scale),
                               PriorSpec{c0, s0, n0}, tc);
        }
        return map_result(map);
      },
      py::arg("bold"), py::arg("mask") = py::none(), py::arg("design"), py::arg("test") = "marginal",
      py::arg("summary") = "marginal", py::arg("rule") = "all", py::arg("coef") = 0, py::arg("radius") = 1.0,
      py::arg("min_cluster") = 1, py::arg("warmup") = 30, py::arg("draws") = 100, py::arg("joint_draws") = 10000,
      py::arg("sharp_subset") = std::vector<int>{0}, py::arg("discount") = 0.95, py::arg("obs_scale") = 1.0,
      py::arg("c0") = 100.0, py::arg("s0") = 1.0, py::arg("n0") = 1.0, py::arg("seed") = 1, py::arg("threads") = 0,
      "Per-voxel probability map; returns {'map', 'processed', 'failures'}.");

  m.def(
      "run_group",
      [](const std::vector<Array>& bolds, const std::vector<std::string>& groups, const std::optional<Array>& mask,
         const Eigen::MatrixXd& design, bool compare, const std::string& group_a, const std::string& group_b,
         bool flip, const std::string& test, const std::string& summary, const std::string& rule, int coef,
         double radius, int warmup, int draws, int joint_draws, double discount, double c0, double s0, double n0,
         std::uint64_t seed, int threads) {
        if (bolds.empty()) throw Error(Errc::EmptyGroup, "no subjects");
        if (!groups.empty() && groups.size() != bolds.size()) {
          throw Error(Errc::InvalidParam, "groups must be empty or one tag per subject");
        }
        std::vector<Subject> subjects;
        for (std::size_t s = 0; s < bolds.size(); ++s) {
          subjects.push_back({"s" + std::to_string(s), groups.empty() ? group_a : groups[s], to_volume(bolds[s], 0.0)});
        }
        GroupRunConfig gc;
        gc.test = test_config(test, summary, rule, coef, radius, 1, warmup, draws, joint_draws, {0}, seed, threads);
        gc.compare = compare;
        gc.group_a = group_a;
        gc.group_b = group_b;
        gc.flip = flip;
        EvidenceMap map;
        {
          py::gil_scoped_release release;
          map = run_group(subjects, to_mask(mask, subjects.front().bold.dims()), to_design(design),
                          model_of(discount, 1.0), PriorSpec{c0, s0, n0}, gc);
        }
        return map_result(map);
      },
      py::arg("bolds"), py::arg("groups") = std::vector<std::string>{}, py::arg("mask") = py::none(),
      py::arg("design"), py::arg("compare") = false, py::arg("group_a") = "A", py::arg("group_b") = "B",
      py::arg("flip") = false, py::arg("test") = "marginal", py::arg("summary") = "marginal", py::arg("rule") = "all",
      py::arg("coef") = 0, py::arg("radius") = 1.0, py::arg("warmup") = 30, py::arg("draws") = 100,
      py::arg("joint_draws") = 10000, py::arg("discount") = 0.95, py::arg("c0") = 100.0, py::arg("s0") = 1.0,
      py::arg("n0") = 1.0, py::arg("seed") = 1, py::arg("threads") = 0,
      "Group map over subjects; with compare=True the map is P(B - A > 0) unless flipped.");

  m.def(
      "gp_anova",
      [](const Eigen::MatrixXd& curves_a, const Eigen::MatrixXd& curves_b, int iterations, int burn_in, int thin,
         const std::string& variant, std::uint64_t seed) {
        std::vector<double> grid(static_cast<std::size_t>(curves_a.cols()));
        for (std::size_t t = 0; t < grid.size(); ++t) grid[t] = static_cast<double>(t);
        const CurveBatch a{"A", curves_a, grid}, b{"B", curves_b, grid};
        GpAnovaConfig cfg;
        cfg.iterations = iterations;
        cfg.burn_in = burn_in;
        cfg.thin = thin;
        cfg.variant = parse_variant(variant);
        Rng rng(seed);
        GpAnovaChain chain;
        {
          py::gil_scoped_release release;
          chain = run_sampler(a, b, cfg, rng);
        }
        const auto n = static_cast<Eigen::Index>(chain.samples.size());
        Eigen::MatrixXd alpha(n, a.points()), mu(n, a.points()), hyper(n, 7);
        for (Eigen::Index k = 0; k < n; ++k) {
          const auto& s = chain.samples[k];
          alpha.row(k) = s.alpha_a.transpose();
          mu.row(k) = s.mu.transpose();
          hyper.row(k) << s.phi, s.sigma2[kEps], s.sigma2[kMu], s.sigma2[kAlpha], s.tau[kEps], s.tau[kMu], s.tau[kAlpha];
        }
        py::dict d;
        d["probabilities"] = test_alpha_diff(chain);
        d["alpha_a"] = alpha;
        d["mu"] = mu;
        d["hyper"] = hyper;
        d["hyper_names"] = std::vector<std::string>{"phi", "sigma2_eps", "sigma2_mu", "sigma2_alpha",
                                                    "tau_eps", "tau_mu", "tau_alpha"};
        d["acceptance"] = chain.acceptance;
        d["step"] = chain.step;
        return d;
      },
      py::arg("curves_a"), py::arg("curves_b"), py::arg("iterations") = 20000, py::arg("burn_in") = 5000,
      py::arg("thin") = 10, py::arg("variant") = "as-printed", py::arg("seed") = 1,
      "Functional ANOVA of two n x p curve batches on the grid 0..p-1.");

  m.def(
      "simulate",
      [](const std::vector<int>& dims, double tr, const std::string& noise, double rho, double sd, double baseline,
         const std::optional<std::vector<int>>& signal_box, double amplitude, const std::vector<double>& regressor,
         std::uint64_t seed, std::uint64_t subject) {
        const SimResult r =
            simulate(sim_spec(dims, tr, noise, rho, sd, baseline, signal_box, amplitude, regressor, seed, subject));
        const Dims3& d = r.truth.dims();
        py::array_t<bool> truth({d.d1, d.d2, d.d3});
        auto view = truth.mutable_unchecked<3>();
        for (int k = 0; k < d.d3; ++k)
          for (int j = 0; j < d.d2; ++j)
            for (int i = 0; i < d.d1; ++i) view(i, j, k) = r.truth.flag(d.index({i, j, k}));
        return py::make_tuple(from_volume(r.bold), truth);
      },
      py::arg("dims"), py::arg("tr") = 2.0, py::arg("noise") = "white", py::arg("rho") = 0.0, py::arg("sd") = 1.0,
      py::arg("baseline") = 0.0, py::arg("signal_box") = py::none(), py::arg("amplitude") = 0.0,
      py::arg("regressor") = std::vector<double>{}, py::arg("seed") = 1, py::arg("subject") = 0,
      "Returns (bold[d1, d2, d3, T], truth mask[d1, d2, d3]).");

  m.def(
      "validate_fpr",
      [](const std::vector<int>& dims, double tr, const std::string& noise, double rho, const Eigen::MatrixXd& design,
         const std::vector<std::string>& modes, double cutoff, int group_subjects, int joint_draws, std::uint64_t seed,
         int threads) {
        const SimSpec spec = sim_spec(dims, tr, noise, rho, 1.0, 0.0, std::nullopt, 0.0, {}, seed, 0);
        ValidationConfig vc;
        vc.modes.clear();
        for (const auto& name : modes) vc.modes.push_back(parse_test_mode(name));
        vc.cutoff = cutoff;
        vc.group_subjects = group_subjects;
        vc.test.joint_draws = joint_draws;
        vc.test.seed = seed;
        vc.test.threads = threads;
        FprReport rep;
        {
          py::gil_scoped_release release;
          rep = validate_fpr(spec, to_design(design), {}, {}, vc);
        }
        py::dict d;
        d["total"] = rep.total;
        d["cutoff"] = rep.cutoff;
        d["individual"] = fpr_list(rep.individual);
        d["group"] = fpr_list(rep.group);
        d["group_subjects"] = rep.group_subjects;
        return d;
      },
      py::arg("dims"), py::arg("tr") = 2.0, py::arg("noise") = "white", py::arg("rho") = 0.0, py::arg("design"),
      py::arg("modes") = std::vector<std::string>{"marginal", "joint", "average"}, py::arg("cutoff") = 0.95,
      py::arg("group_subjects") = 0, py::arg("joint_draws") = 10000, py::arg("seed") = 1, py::arg("threads") = 0,
      "False-positive rates on simulated null data.");
}
