#ifndef VOXELFLOW_GP_ANOVA_HPP
#define VOXELFLOW_GP_ANOVA_HPP

#include <Eigen/Dense>
#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "voxelflow/rng.hpp"

namespace voxelflow {

// n_g curves observed on a common grid of p time points.
struct CurveBatch {
  std::string group;
  Eigen::MatrixXd curves;  // n_g x p
  std::vector<double> grid;

  int count() const { return static_cast<int>(curves.rows()); }
  int points() const { return static_cast<int>(curves.cols()); }
};

// One curve per row; blank lines and '#' comments skipped. Grid is 0..p-1.
CurveBatch read_curves_csv(const std::filesystem::path& path, const std::string& group);

struct Box {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double x) const { return x >= lo && x <= hi; }
};

enum class ConditionalVariant {
  AsPrinted,  // phi mean without 1/sigma2_mu, alpha_A from group A only, sigma2_alpha ~ TIG(p/2+1, D2)
  Derived,    // conditionals derived from the two-group model as written
};

std::string_view to_string(ConditionalVariant v);
ConditionalVariant parse_variant(std::string_view name);

enum Component { kEps = 0, kMu = 1, kAlpha = 2 };

struct GpAnovaState {
  Eigen::VectorXd mu;
  Eigen::VectorXd alpha_a;
  Eigen::VectorXd alpha_b;  // always -alpha_a
  double phi = 0.0;
  std::array<double, 3> sigma2{1.0, 1.0, 1.0};  // indexed by Component
  std::array<double, 3> tau{1.0, 1.0, 1.0};
};

struct GpAnovaConfig {
  std::optional<Box> sigma2_box;  // default [1e-6, 1e3 * var(data)]
  std::optional<Box> tau_box;     // default [grid spacing, grid span]
  std::optional<Box> phi_box;     // default [min - 3 sd, max + 3 sd]
  int iterations = 20000;
  int burn_in = 5000;
  int thin = 10;
  std::array<double, 3> step{0.5, 0.5, 0.5};  // random-walk sd on log tau
  bool tune_steps = true;
  double jitter = 1e-6;
  ConditionalVariant variant = ConditionalVariant::AsPrinted;
};

// Config with every box filled in from the data. Throws InvalidParam.
struct ResolvedConfig {
  GpAnovaConfig config;
  Box sigma2;
  Box tau;
  Box phi;
};
ResolvedConfig resolve_config(const GpAnovaConfig& config, const CurveBatch& a, const CurveBatch& b);

// exp(-((t - t') / tau)^2) + jitter * I.
Eigen::MatrixXd build_corr(const std::vector<double>& grid, double tau, double jitter = 1e-6);

// Starting point: pooled mean for mu, half the group contrast for alpha_A,
// data-scaled variances, geometric box midpoints for tau.
GpAnovaState initial_state(const CurveBatch& a, const CurveBatch& b, const ResolvedConfig& rc);

enum class GibbsBlock { Phi, Mu, Alpha, Sigma2Eps, Sigma2Mu, Sigma2Alpha };

// One full-conditional draw. Throws EmptyTruncation naming the block.
void update_block(GibbsBlock block, GpAnovaState& state, const CurveBatch& a, const CurveBatch& b,
                  const ResolvedConfig& rc, Rng& rng);

// phi, mu, alpha_A, then the three variances.
GpAnovaState gibbs_step(const GpAnovaState& state, const CurveBatch& a, const CurveBatch& b, const ResolvedConfig& rc,
                        Rng& rng);

// Unnormalized log full conditional of tau_c at `tau` (box prior, no Jacobian).
double log_tau_conditional(Component c, double tau, const GpAnovaState& state, const CurveBatch& a,
                           const CurveBatch& b, const ResolvedConfig& rc);

struct MhCounters {
  std::array<long, 3> proposed{0, 0, 0};
  std::array<long, 3> accepted{0, 0, 0};
  double rate(Component c) const {
    return proposed[c] > 0 ? static_cast<double>(accepted[c]) / static_cast<double>(proposed[c]) : 0.0;
  }
};

// Random walk on log tau for each component, out-of-box proposals rejected.
GpAnovaState mh_step_tau(const GpAnovaState& state, const CurveBatch& a, const CurveBatch& b, const ResolvedConfig& rc,
                         const std::array<double, 3>& step, MhCounters& counters, Rng& rng);

struct GpAnovaChain {
  std::vector<GpAnovaState> samples;
  std::array<double, 3> acceptance{0.0, 0.0, 0.0};  // post-burn-in MH rates
  std::array<double, 3> step{0.0, 0.0, 0.0};        // frozen step sizes
  Eigen::VectorXd mu_mean;
  Eigen::VectorXd alpha_mean;
  ResolvedConfig config;
};

// Chain of length (iterations - burn_in) / thin.
GpAnovaChain run_sampler(const CurveBatch& a, const CurveBatch& b, const GpAnovaConfig& config, Rng& rng);

// Per time point, the fraction of samples with alpha_A - alpha_B > 0.
std::vector<double> test_alpha_diff(const GpAnovaChain& chain);

}  // namespace voxelflow

#endif  // VOXELFLOW_GP_ANOVA_HPP
