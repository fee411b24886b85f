#include "voxelflow/design.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "voxelflow/error.hpp"

namespace voxelflow {

namespace {

double lobe(double t, double delay, double dispersion) {
  if (t <= 0.0) return 0.0;
  const double shape = delay / dispersion;
  return std::exp(shape * std::log(t / delay) - (t - delay) / dispersion);
}

}  // namespace

double double_gamma(double t, const HrfParams& params) {
  return lobe(t, params.peak_delay, params.peak_dispersion) -
         params.ratio * lobe(t, params.undershoot_delay, params.undershoot_dispersion);
}

Hrf hrf_double_gamma(double tr, const HrfParams& params) {
  if (!(tr > 0.0)) throw Error(Errc::InvalidParam, "TR must be positive");
  if (!(params.peak_delay > 0.0) || !(params.undershoot_delay > 0.0) || !(params.peak_dispersion > 0.0) ||
      !(params.undershoot_dispersion > 0.0)) {
    throw Error(Errc::InvalidParam, "HRF delays and dispersions must be positive");
  }
  if (!(params.length > 0.0) || !(params.ratio >= 0.0)) {
    throw Error(Errc::InvalidParam, "HRF length must be positive and ratio nonnegative");
  }
  Hrf h{params, tr, {}};
  const int samples = static_cast<int>(std::floor(params.length / tr + 1e-9)) + 1;
  h.kernel.resize(samples);
  for (int n = 0; n < samples; ++n) h.kernel[n] = double_gamma(n * tr, params);
  return h;
}

std::vector<double> convolve(const StimulusTimeline& f, const Hrf& h) {
  const auto frames = static_cast<std::ptrdiff_t>(f.values.size());
  const auto taps = static_cast<std::ptrdiff_t>(h.kernel.size());
  std::vector<double> x(f.values.size(), 0.0);
  for (std::ptrdiff_t t = 0; t < frames; ++t) {
    double acc = 0.0;
    for (std::ptrdiff_t tau = 0; tau <= std::min(t, taps - 1); ++tau) acc += h.kernel[tau] * f.values[t - tau];
    x[t] = acc;
  }
  return x;
}

std::vector<double> normalize_max_abs(std::vector<double> x) {
  double peak = 0.0;
  for (double v : x) peak = std::max(peak, std::abs(v));
  if (peak > 0.0) {
    for (double& v : x) v /= peak;
  }
  return x;
}

DesignMatrix build_design(std::span<const double> x, int drift_order) {
  if (drift_order < 0) throw Error(Errc::InvalidParam, "drift_order must be >= 0");
  const auto frames = static_cast<Eigen::Index>(x.size());
  DesignMatrix design;
  design.rows.resize(frames, 2 + drift_order);
  for (Eigen::Index t = 0; t < frames; ++t) design.rows(t, 0) = x[t];
  design.rows.col(1).setOnes();

  // Gram-Schmidt on powers of t rescaled to [-1, 1]; orthogonalize twice
  // against the intercept and earlier drift columns.
  Eigen::VectorXd u(frames);
  for (Eigen::Index t = 0; t < frames; ++t) {
    u(t) = frames > 1 ? 2.0 * static_cast<double>(t) / static_cast<double>(frames - 1) - 1.0 : 0.0;
  }
  for (int order = 1; order <= drift_order; ++order) {
    Eigen::VectorXd col = u.array().pow(order).matrix();
    for (int pass = 0; pass < 2; ++pass) {
      for (int prev = 1; prev < 1 + order; ++prev) {
        const auto basis = design.rows.col(prev);
        const double norm2 = basis.squaredNorm();
        if (norm2 > 0.0) col -= (basis.dot(col) / norm2) * basis;
      }
    }
    const double peak = col.cwiseAbs().maxCoeff();
    if (peak > 0.0) col /= peak;
    design.rows.col(1 + order) = col;
  }
  design.bold_index = 0;
  return design;
}

StimulusTimeline block_stimulus(int frames, double tr, double on_seconds, double off_seconds) {
  if (frames < 0 || !(tr > 0.0) || !(on_seconds > 0.0) || !(off_seconds >= 0.0)) {
    throw Error(Errc::InvalidParam, "block design needs frames >= 0, TR > 0, on > 0, off >= 0");
  }
  StimulusTimeline f{std::vector<double>(frames, 0.0), StimulusKind::Block};
  const double period = on_seconds + off_seconds;
  for (int n = 0; n < frames; ++n) {
    const double phase = std::fmod(n * tr, period);
    f.values[n] = phase < on_seconds - 1e-9 ? 1.0 : 0.0;
  }
  return f;
}

StimulusTimeline event_stimulus(int frames, double tr, double interval_seconds, double first_onset) {
  if (frames < 0 || !(tr > 0.0) || !(interval_seconds > 0.0) || first_onset < 0.0) {
    throw Error(Errc::InvalidParam, "event design needs TR > 0 and interval > 0");
  }
  std::vector<StimulusEvent> events;
  for (double onset = first_onset; onset < frames * tr; onset += interval_seconds) events.push_back({onset, 0.0});
  auto f = rasterize(events, frames, tr);
  f.kind = StimulusKind::Event;
  return f;
}

StimulusTimeline rasterize(std::span<const StimulusEvent> events, int frames, double tr) {
  if (frames < 0 || !(tr > 0.0)) throw Error(Errc::InvalidParam, "rasterize needs TR > 0");
  StimulusTimeline f{std::vector<double>(frames, 0.0), StimulusKind::Custom};
  for (const auto& e : events) {
    if (!std::isfinite(e.onset) || !std::isfinite(e.duration) || e.duration < 0.0) {
      throw Error(Errc::InvalidParam, "event onset/duration must be finite, duration >= 0");
    }
    if (e.duration == 0.0) {
      const auto n = static_cast<long>(std::floor(e.onset / tr));
      if (n >= 0 && n < frames) f.values[n] = 1.0;
      continue;
    }
    const double end = e.onset + e.duration;
    for (int n = std::max(0, static_cast<int>(std::floor(e.onset / tr))); n < frames && n * tr < end; ++n) {
      const double overlap = std::min(end, (n + 1) * tr) - std::max(e.onset, n * tr);
      if (overlap > 0.0) f.values[n] = std::min(1.0, f.values[n] + overlap / tr);
    }
  }
  return f;
}

std::vector<StimulusEvent> read_events_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoFailure, "cannot open " + path.string());
  std::vector<StimulusEvent> events;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    StimulusEvent e;
    if (!(ss >> e.onset >> e.duration)) {
      if (first) {
        first = false;
        continue;
      }
      throw Error(Errc::InvalidParam, "malformed design row: " + line);
    }
    first = false;
    events.push_back(e);
  }
  return events;
}

}  // namespace voxelflow
