#pragma once

#include <span>
#include <string>
#include <vector>

#include "canvi/model.hpp"
#include "canvi/task.hpp"

namespace canvi {

/// Monte-Carlo estimate with its standard error.
struct MonteCarloValue {
  double value = 0.0;
  double std_error = 0.0;
};

/// Importance-weighted region size at one x: (1/S) sum_j (1/q(theta_j|x)) *
/// 1[score <= threshold] with theta_j ~ q(.|x). Weights are finite almost
/// surely because theta_j is drawn from q itself.
double region_size_iw(const PosteriorModel& model, double threshold,
                      std::span<const double> x, std::size_t n_samples,
                      RngStream& rng);

/// Same estimate plus the Monte-Carlo standard error over the S terms.
MonteCarloValue region_size_iw_detailed(const PosteriorModel& model, double threshold,
                                        std::span<const double> x,
                                        std::size_t n_samples, RngStream& rng);

/// Axis-aligned evaluation grid; points sit at cell centers.
struct GridSpec {
  std::vector<Interval> bounds;
  std::vector<int> counts;

  static GridSpec uniform(const std::vector<Interval>& bounds, int points_per_dim);
  double cell_volume() const;
  std::size_t total_points() const;
  /// cell_volume * total_points, computed exactly like region_size_grid.
  double full_volume() const;
};

/// Grid-discretized region size: cell volume times the number of grid points
/// whose score is <= threshold. Supports theta_dim <= 3 (throws
/// std::invalid_argument above that).
double region_size_grid(const PosteriorModel& model, double threshold,
                        std::span<const double> x, const GridSpec& grid);

/// Grid estimate plus a discretization-error proxy (half the volume of cells
/// whose membership differs from an axis neighbor).
MonteCarloValue region_size_grid_detailed(const PosteriorModel& model,
                                          double threshold,
                                          std::span<const double> x,
                                          const GridSpec& grid);

/// Empirical inverse efficiency: average region size over the test points.
struct EfficiencyEstimate {
  double mean_size = 0.0;
  double std_error = 0.0;  // across test points
  std::vector<double> per_point;
  std::string estimator;  // "iw_mc", "grid", or "analytic"
};

EfficiencyEstimate inverse_efficiency(const PosteriorModel& model, double threshold,
                                      const JointDataset& test, std::size_t n_samples,
                                      RngStream rng);

/// Grid-backed variant for low-dimensional parameters (estimator "grid").
EfficiencyEstimate inverse_efficiency_grid(const PosteriorModel& model,
                                           double threshold, const JointDataset& test,
                                           const GridSpec& grid);

/// Closed-form split-conformal threshold for the correlated-Gaussian pair
/// with candidate slope phi at miscoverage alpha.
double gaussian_analytic_threshold(double rho, double phi, double alpha);

/// Closed-form region length 2 * sqrt(phi^2 + 1 - 2 phi rho) * Phi^{-1}(1 - alpha/2);
/// minimized at phi = rho.
double gaussian_analytic_length(double rho, double phi, double alpha);

/// Exact inverse efficiencies for the two-branch piecewise-uniform
/// counterexample: the true posterior gives 50, the truncated candidate with
/// width b gives b/2, for alpha inside the validity window (0, b/200).
/// Computed by enumerating the construction's score atoms and uniform pieces.
struct CounterexampleLengths {
  double l_true = 0.0;
  double l_candidate = 0.0;
};

CounterexampleLengths counterexample_lengths(double b, double alpha);

/// Monte-Carlo confirmation of the counterexample lengths: region measures
/// at the analytic thresholds estimated by uniform sampling over the domain.
struct CounterexampleMc {
  MonteCarloValue l_true;
  MonteCarloValue l_candidate;
};

CounterexampleMc counterexample_lengths_mc(double b, double alpha,
                                           std::size_t n_samples, RngStream rng);

/// Region-length curve over a slope grid for the correlated-Gaussian pair:
/// the closed form next to a Monte-Carlo estimate (empirically calibrated
/// threshold, grid-measured lengths). Replicate draws are shared across phi
/// values so the deviation curve is smooth; the reported standard error
/// combines the across-replicate spread with the grid quantization term.
struct GaussianVerifyOptions {
  std::size_t n_calibration = 4000;
  std::size_t n_test_points = 25;
  int n_replicates = 8;
  double grid_lo = -10.0;
  double grid_hi = 10.0;
  double grid_step = 0.1;
};

struct GaussianVerifyPoint {
  double phi = 0.0;
  double analytic = 0.0;
  double mc = 0.0;
  double mc_se = 0.0;
};

std::vector<GaussianVerifyPoint> gaussian_verify_curve(
    double rho, double alpha, double phi_min, double phi_max, double phi_step,
    const GaussianVerifyOptions& options, RngStream rng);

}  // namespace canvi
