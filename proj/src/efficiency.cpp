#include "canvi/efficiency.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

#include "canvi/conformal.hpp"
#include "canvi/stats.hpp"

namespace canvi {

MonteCarloValue region_size_iw_detailed(const PosteriorModel& model, double threshold,
                                        std::span<const double> x,
                                        std::size_t n_samples, RngStream& rng) {
  if (n_samples < 1) {
    throw std::invalid_argument("region_size_iw: n_samples must be >= 1");
  }
  double sum = 0.0;
  double sum_sq = 0.0;
  const auto densities = model.sample_densities(x, n_samples, rng);
  for (double density : densities) {
    const double s = 1.0 / density;  // the draw's score; also its weight
    const double term = (s <= threshold) ? s : 0.0;
    sum += term;
    sum_sq += term * term;
  }
  const double n = static_cast<double>(n_samples);
  const double m = sum / n;
  double se = 0.0;
  if (n_samples > 1) {
    const double var = std::max(0.0, (sum_sq - n * m * m) / (n - 1.0));
    se = std::sqrt(var / n);
  }
  return {m, se};
}

double region_size_iw(const PosteriorModel& model, double threshold,
                      std::span<const double> x, std::size_t n_samples,
                      RngStream& rng) {
  return region_size_iw_detailed(model, threshold, x, n_samples, rng).value;
}

// ---------------------------------------------------------------------------
// Grid estimator

GridSpec GridSpec::uniform(const std::vector<Interval>& bounds, int points_per_dim) {
  if (points_per_dim < 2) {
    throw std::invalid_argument("GridSpec: need at least 2 points per dimension");
  }
  GridSpec g;
  g.bounds = bounds;
  g.counts.assign(bounds.size(), points_per_dim);
  for (const auto& iv : bounds) {
    if (!iv.bounded() || !(iv.hi > iv.lo)) {
      throw std::invalid_argument("GridSpec: bounds must be finite nonempty intervals");
    }
  }
  return g;
}

double GridSpec::cell_volume() const {
  double v = 1.0;
  for (std::size_t d = 0; d < bounds.size(); ++d) {
    v *= (bounds[d].hi - bounds[d].lo) / counts[d];
  }
  return v;
}

std::size_t GridSpec::total_points() const {
  std::size_t n = 1;
  for (int c : counts) n *= static_cast<std::size_t>(c);
  return n;
}

double GridSpec::full_volume() const {
  return cell_volume() * static_cast<double>(total_points());
}

namespace {

// Visits every grid point (cell centers); fn(theta, flat_index).
template <typename Fn>
void for_each_grid_point(const GridSpec& grid, Fn&& fn) {
  const int dim = static_cast<int>(grid.bounds.size());
  std::vector<int> idx(dim, 0);
  std::vector<double> theta(dim);
  std::size_t flat = 0;
  for (;;) {
    for (int d = 0; d < dim; ++d) {
      const auto& iv = grid.bounds[d];
      const double w = (iv.hi - iv.lo) / grid.counts[d];
      theta[d] = iv.lo + (idx[d] + 0.5) * w;
    }
    fn(theta, flat);
    ++flat;
    int d = dim - 1;
    while (d >= 0 && ++idx[d] == grid.counts[d]) {
      idx[d] = 0;
      --d;
    }
    if (d < 0) break;
  }
}

void check_grid(const PosteriorModel& model, const GridSpec& grid) {
  if (grid.bounds.size() != static_cast<std::size_t>(model.theta_dim()) ||
      grid.counts.size() != grid.bounds.size()) {
    throw std::invalid_argument("region_size_grid: grid/model dimension mismatch");
  }
  if (model.theta_dim() > 3) {
    throw std::invalid_argument("region_size_grid: supported only up to 3 dimensions");
  }
}

}  // namespace

double region_size_grid(const PosteriorModel& model, double threshold,
                        std::span<const double> x, const GridSpec& grid) {
  check_grid(model, grid);
  std::size_t inside = 0;
  for_each_grid_point(grid, [&](const std::vector<double>& theta, std::size_t) {
    if (score(model, x, theta) <= threshold) ++inside;
  });
  return grid.cell_volume() * static_cast<double>(inside);
}

MonteCarloValue region_size_grid_detailed(const PosteriorModel& model,
                                          double threshold,
                                          std::span<const double> x,
                                          const GridSpec& grid) {
  check_grid(model, grid);
  const int dim = static_cast<int>(grid.bounds.size());
  std::vector<char> member(grid.total_points());
  std::size_t inside = 0;
  for_each_grid_point(grid, [&](const std::vector<double>& theta, std::size_t flat) {
    const bool in = score(model, x, theta) <= threshold;
    member[flat] = in ? 1 : 0;
    if (in) ++inside;
  });
  // Boundary cells (membership differs from the next cell along some axis)
  // bound the discretization error.
  std::vector<std::size_t> stride(dim, 1);
  for (int d = dim - 2; d >= 0; --d) {
    stride[d] = stride[d + 1] * static_cast<std::size_t>(grid.counts[d + 1]);
  }
  std::size_t boundary = 0;
  for_each_grid_point(grid, [&](const std::vector<double>&, std::size_t flat) {
    for (int d = 0; d < dim; ++d) {
      const std::size_t along = (flat / stride[d]) % grid.counts[d];
      if (along + 1 < static_cast<std::size_t>(grid.counts[d]) &&
          member[flat] != member[flat + stride[d]]) {
        ++boundary;
        break;
      }
    }
  });
  return {grid.cell_volume() * static_cast<double>(inside),
          0.5 * grid.cell_volume() * static_cast<double>(boundary)};
}

EfficiencyEstimate inverse_efficiency(const PosteriorModel& model, double threshold,
                                      const JointDataset& test, std::size_t n_samples,
                                      RngStream rng) {
  if (test.size() == 0) {
    throw std::invalid_argument("inverse_efficiency: empty test set");
  }
  EfficiencyEstimate est;
  est.estimator = "iw_mc";
  est.per_point.resize(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) {
    RngStream point_rng = rng.substream(i);
    est.per_point[i] = region_size_iw(model, threshold, test.x(i), n_samples,
                                      point_rng);
  }
  est.mean_size = mean(est.per_point);
  est.std_error = standard_error(est.per_point);
  return est;
}

EfficiencyEstimate inverse_efficiency_grid(const PosteriorModel& model,
                                           double threshold, const JointDataset& test,
                                           const GridSpec& grid) {
  if (test.size() == 0) {
    throw std::invalid_argument("inverse_efficiency_grid: empty test set");
  }
  EfficiencyEstimate est;
  est.estimator = "grid";
  est.per_point.resize(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) {
    est.per_point[i] = region_size_grid(model, threshold, test.x(i), grid);
  }
  est.mean_size = mean(est.per_point);
  est.std_error = standard_error(est.per_point);
  return est;
}

// ---------------------------------------------------------------------------
// Correlated-Gaussian closed forms

double gaussian_analytic_threshold(double rho, double phi, double alpha) {
  if (!(std::abs(rho) < 1.0)) {
    throw std::domain_error("gaussian_analytic_threshold: |rho| must be < 1");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::domain_error("gaussian_analytic_threshold: alpha outside (0, 1)");
  }
  const double z = std_normal_quantile(1.0 - alpha / 2.0);
  const double one_m_rho2 = 1.0 - rho * rho;
  const double ratio = (phi * phi + 1.0 - 2.0 * phi * rho) / one_m_rho2;
  return std::sqrt(2.0 * M_PI * one_m_rho2 * std::exp(ratio * z * z));
}

double gaussian_analytic_length(double rho, double phi, double alpha) {
  if (!(std::abs(rho) < 1.0)) {
    throw std::domain_error("gaussian_analytic_length: |rho| must be < 1");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::domain_error("gaussian_analytic_length: alpha outside (0, 1)");
  }
  const double z = std_normal_quantile(1.0 - alpha / 2.0);
  return 2.0 * std::sqrt(phi * phi + 1.0 - 2.0 * phi * rho) * z;
}

std::vector<GaussianVerifyPoint> gaussian_verify_curve(
    double rho, double alpha, double phi_min, double phi_max, double phi_step,
    const GaussianVerifyOptions& options, RngStream rng) {
  if (!(std::abs(rho) < 1.0)) {
    throw std::domain_error("gaussian_verify_curve: |rho| must be < 1");
  }
  if (!(phi_step > 0.0) || !(phi_max >= phi_min)) {
    throw std::invalid_argument("gaussian_verify_curve: bad phi grid");
  }
  const auto task = make_task("bivariate_gaussian", 0, rho);
  const double variance = 1.0 - rho * rho;

  std::vector<double> phis;
  for (double phi = phi_min; phi <= phi_max + 1e-12; phi += phi_step) {
    phis.push_back(phi);
  }
  const std::size_t n_grid = static_cast<std::size_t>(
      std::floor((options.grid_hi - options.grid_lo) / options.grid_step));

  // lengths[phi][replicate]
  std::vector<std::vector<double>> lengths(
      phis.size(), std::vector<double>(options.n_replicates, 0.0));

  for (int r = 0; r < options.n_replicates; ++r) {
    const auto d_calib = sample_joint(*task, options.n_calibration,
                                      rng.substream(2 * r), DatasetRole::calibration);
    RngStream test_rng = rng.substream(2 * r + 1);
    std::vector<double> test_x(options.n_test_points);
    for (double& v : test_x) v = test_rng.normal();

    std::vector<double> scores(d_calib.size());
    for (std::size_t p = 0; p < phis.size(); ++p) {
      const auto model = ConditionalLinearGaussian::scalar(phis[p], variance);
      for (std::size_t i = 0; i < d_calib.size(); ++i) {
        scores[i] = score(model, d_calib.x(i), d_calib.theta(i));
      }
      const double threshold = conformal_quantile(scores, alpha);
      double total = 0.0;
      for (double xv : test_x) {
        const std::vector<double> x = {xv};
        std::size_t inside = 0;
        for (std::size_t g = 0; g < n_grid; ++g) {
          const std::vector<double> theta = {options.grid_lo +
                                             (g + 0.5) * options.grid_step};
          if (score(model, x, theta) <= threshold) ++inside;
        }
        total += options.grid_step * static_cast<double>(inside);
      }
      lengths[p][r] = total / static_cast<double>(options.n_test_points);
    }
  }

  std::vector<GaussianVerifyPoint> out(phis.size());
  for (std::size_t p = 0; p < phis.size(); ++p) {
    out[p].phi = phis[p];
    out[p].analytic = gaussian_analytic_length(rho, phis[p], alpha);
    out[p].mc = mean(lengths[p]);
    const double se_rep = standard_error(lengths[p]);
    const double grid_term = options.grid_step / 4.0;
    out[p].mc_se = std::sqrt(se_rep * se_rep + grid_term * grid_term);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Piecewise-uniform counterexample
//
// X ~ Bernoulli(1/2); truth: theta | x=0 ~ U[0, 200], theta | x=1 ~
// U[200, 300]. The candidate truncates the x=0 conditional to U[0, b] with
// b < 100 and keeps the x=1 conditional exact. Scores are piecewise constant,
// so thresholds and region measures follow by enumerating the pieces. The
// score-atom masses are tallied per conditioning branch, which places the
// candidate's quantile switch at alpha = b/200; the preconditions keep alpha
// below every switch point.

namespace {

struct UniformPiece {
  int x;              // conditioning branch
  double lo, hi;      // support of the piece
  double cand_density;  // candidate density on the piece (0 = unsupported)
  double branch_mass;   // true conditional mass of the piece given x
};

std::vector<UniformPiece> counterexample_pieces(double b) {
  return {
      {0, 0.0, b, 1.0 / b, b / 200.0},
      {0, b, 200.0, 0.0, 1.0 - b / 200.0},
      {1, 200.0, 300.0, 1.0 / 100.0, 1.0},
  };
}

std::vector<UniformPiece> truth_pieces() {
  return {
      {0, 0.0, 200.0, 1.0 / 200.0, 1.0},
      {1, 200.0, 300.0, 1.0 / 100.0, 1.0},
  };
}

double piece_score(const UniformPiece& p) {
  return p.cand_density > 0.0 ? 1.0 / p.cand_density : kInfiniteScore;
}

// alpha-quantile of the score atoms, then the expected region length over x.
double enumerate_length(const std::vector<UniformPiece>& pieces, double alpha) {
  std::vector<std::pair<double, double>> atoms;  // (score, mass)
  for (const auto& p : pieces) atoms.emplace_back(piece_score(p), p.branch_mass);
  std::sort(atoms.begin(), atoms.end());
  double cum = 0.0;
  double threshold = atoms.back().first;
  for (const auto& [s, mass] : atoms) {
    cum += mass;
    if (alpha <= cum) {
      threshold = s;
      break;
    }
  }
  // L(C(x)) per branch, then average over the two equally likely x values.
  double lengths[2] = {0.0, 0.0};
  for (const auto& p : pieces) {
    if (piece_score(p) <= threshold) lengths[p.x] += p.hi - p.lo;
  }
  return 0.5 * (lengths[0] + lengths[1]);
}

void check_counterexample_window(double b, double alpha) {
  if (!(b > 0.0 && b < 100.0)) {
    throw std::domain_error("counterexample: b must lie in (0, 100)");
  }
  if (!(alpha > 0.0 && alpha < b / 200.0)) {
    throw std::domain_error("counterexample: alpha must lie in (0, b/200)");
  }
}

}  // namespace

CounterexampleLengths counterexample_lengths(double b, double alpha) {
  check_counterexample_window(b, alpha);
  return {enumerate_length(truth_pieces(), alpha),
          enumerate_length(counterexample_pieces(b), alpha)};
}

CounterexampleMc counterexample_lengths_mc(double b, double alpha,
                                           std::size_t n_samples, RngStream rng) {
  check_counterexample_window(b, alpha);
  if (n_samples < 2) {
    throw std::invalid_argument("counterexample_lengths_mc: need n_samples >= 2");
  }

  // Region measure at the enumerated thresholds, by uniform sampling over the
  // parameter domain [0, 300]: E_x[L(C(x))] = 300 * P(U in C(X)).
  auto simulate = [&](const std::vector<UniformPiece>& pieces,
                      RngStream stream) -> MonteCarloValue {
    std::vector<std::pair<double, double>> atoms;
    for (const auto& p : pieces) atoms.emplace_back(piece_score(p), p.branch_mass);
    std::sort(atoms.begin(), atoms.end());
    double cum = 0.0;
    double threshold = atoms.back().first;
    for (const auto& [s, mass] : atoms) {
      cum += mass;
      if (alpha <= cum) {
        threshold = s;
        break;
      }
    }
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t i = 0; i < n_samples; ++i) {
      const int x = stream.bernoulli(0.5);
      const double u = stream.uniform(0.0, 300.0);
      double s = kInfiniteScore;
      for (const auto& p : pieces) {
        if (p.x == x && u >= p.lo && u < p.hi && p.cand_density > 0.0) {
          s = 1.0 / p.cand_density;
          break;
        }
      }
      const double h = (s <= threshold) ? 300.0 : 0.0;
      sum += h;
      sum_sq += h * h;
    }
    const double n = static_cast<double>(n_samples);
    const double m = sum / n;
    const double var = std::max(0.0, (sum_sq - n * m * m) / (n - 1.0));
    return {m, std::sqrt(var / n)};
  };

  return {simulate(truth_pieces(), rng.substream(0)),
          simulate(counterexample_pieces(b), rng.substream(1))};
}

}  // namespace canvi
