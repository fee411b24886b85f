#ifndef VOXELFLOW_DESIGN_HPP
#define VOXELFLOW_DESIGN_HPP

#include <Eigen/Dense>
#include <filesystem>
#include <span>
#include <vector>

namespace voxelflow {

enum class StimulusKind { Block, Event, Custom };

struct StimulusTimeline {
  std::vector<double> values;  // f_t in [0, 1]
  StimulusKind kind = StimulusKind::Custom;
};

// Double-gamma parameters in seconds. Each lobe is
//   (t / delay)^(delay / dispersion) * exp(-(t - delay) / dispersion),
// which peaks at exactly `delay` with height 1; the undershoot lobe is
// scaled by `ratio` and subtracted.
struct HrfParams {
  double peak_delay = 6.0;
  double undershoot_delay = 16.0;
  double peak_dispersion = 1.0;
  double undershoot_dispersion = 1.0;
  double ratio = 1.0 / 6.0;
  double length = 32.0;
};

struct Hrf {
  HrfParams params;
  double tr = 0.0;
  std::vector<double> kernel;
};

struct DesignMatrix {
  Eigen::MatrixXd rows;  // T x p; row t is F_t'
  int bold_index = 0;

  int p() const { return static_cast<int>(rows.cols()); }
  int frames() const { return static_cast<int>(rows.rows()); }
  Eigen::VectorXd regressor(int t) const { return rows.row(t).transpose(); }
};

// Continuous double-gamma value at time t seconds.
double double_gamma(double t, const HrfParams& params);

// Throws InvalidParam on nonpositive TR, delays, dispersions or length.
Hrf hrf_double_gamma(double tr, const HrfParams& params = {});

// Causal discrete convolution truncated to the stimulus length.
std::vector<double> convolve(const StimulusTimeline& f, const Hrf& h);

// Scales so that max |x| = 1; an all-zero input is returned unchanged.
std::vector<double> normalize_max_abs(std::vector<double> x);

// Columns [x, 1, drift_1 .. drift_order]; drift columns are orthogonal
// polynomials in t, zero-mean, scaled to max |.| = 1.
DesignMatrix build_design(std::span<const double> x, int drift_order);

// On/off boxcar starting with an "on" block.
StimulusTimeline block_stimulus(int frames, double tr, double on_seconds, double off_seconds);
// Unit impulses every `interval_seconds`, starting at `first_onset`.
StimulusTimeline event_stimulus(int frames, double tr, double interval_seconds, double first_onset = 0.0);

struct StimulusEvent {
  double onset = 0.0;
  double duration = 0.0;
};

// Rasterize (onset, duration) pairs at TR. Sample n covers [n*TR, (n+1)*TR);
// its value is the covered fraction, and zero-duration events mark a 1.
StimulusTimeline rasterize(std::span<const StimulusEvent> events, int frames, double tr);
// Two-column CSV: onset seconds, duration seconds. A non-numeric first line is a header.
std::vector<StimulusEvent> read_events_csv(const std::filesystem::path& path);

}  // namespace voxelflow

#endif  // VOXELFLOW_DESIGN_HPP
