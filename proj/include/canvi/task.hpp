#pragma once

#include <array>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "canvi/rng.hpp"

namespace canvi {

/// Per-dimension parameter support; unbounded ends use +-inf.
struct Interval {
  double lo;
  double hi;
  bool bounded() const;
};

struct TaskSpec {
  std::string name;
  int theta_dim = 0;
  int x_dim = 0;
  std::vector<Interval> theta_support;
};

enum class DatasetRole { train, calibration, test, recalibration };

std::string to_string(DatasetRole role);
DatasetRole dataset_role_from_string(const std::string& s);

/// Ordered (theta, x) pairs stored row-major, plus the stream identity that
/// produced them.
struct JointDataset {
  std::string task_name;
  DatasetRole role = DatasetRole::train;
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;
  int theta_dim = 0;
  int x_dim = 0;
  std::vector<double> thetas;  // n * theta_dim
  std::vector<double> xs;      // n * x_dim

  std::size_t size() const { return theta_dim == 0 ? 0 : thetas.size() / theta_dim; }
  std::span<const double> theta(std::size_t i) const {
    return {thetas.data() + i * theta_dim, static_cast<std::size_t>(theta_dim)};
  }
  std::span<const double> x(std::size_t i) const {
    return {xs.data() + i * x_dim, static_cast<std::size_t>(x_dim)};
  }
};

/// A benchmark generative task: prior over theta plus forward model for x.
class Task {
 public:
  virtual ~Task() = default;
  const TaskSpec& spec() const { return spec_; }
  virtual std::vector<double> sample_prior(RngStream& rng) const = 0;
  virtual std::vector<double> simulate(std::span<const double> theta,
                                       RngStream& rng) const = 0;

 protected:
  TaskSpec spec_;
};

/// Factory for the benchmark suite. Known names: gaussian_linear,
/// gaussian_linear_uniform, slcp_distractors, bernoulli_glm_raw,
/// gaussian_mixture, two_moons, sir, lotka_volterra, arch, and the analytic
/// bivariate_gaussian used by the closed-form checks. task_seed freezes any
/// per-task randomness (distractor mixture, stimulus, permutation).
/// Throws std::invalid_argument for unknown names.
std::unique_ptr<Task> make_task(const std::string& name, std::uint64_t task_seed = 0,
                                double rho = 0.3);

std::vector<std::string> task_names();

/// n i.i.d. joint samples; sample i consumes only substream i of rng, so the
/// result is independent of traversal order and worker count.
JointDataset sample_joint(const Task& task, std::size_t n, const RngStream& rng,
                          DatasetRole role);

/// Deterministic two-moons forward map with the latent noise (a, r) fixed.
std::array<double, 2> two_moons_forward(std::span<const double> theta, double a,
                                        double r);

/// (S, I, R) at every integrator step including t = 0; used by the
/// conservation checks.
std::vector<std::array<double, 3>> sir_trajectory(std::span<const double> theta);

/// Deterministic ARCH recursion for a given innovation sequence xi.
std::vector<double> arch_forward(std::span<const double> theta,
                                 std::span<const double> xi);

/// Exact log P(y | theta) for the lag-one ARCH model, unrolled over the
/// conditional variances 0.2 + theta2 * e_{t-1}^2 with e_0 = 0.
/// Throws std::domain_error if a conditional variance is not positive.
double arch_log_likelihood(std::span<const double> theta,
                           std::span<const double> y_series);

/// Bivariate-Gaussian task (correlation rho): theta ~ N(0,1),
/// x | theta ~ N(rho * theta, 1 - rho^2). Marginally x ~ N(0,1).
class BivariateGaussianTask : public Task {
 public:
  explicit BivariateGaussianTask(double rho);
  std::vector<double> sample_prior(RngStream& rng) const override;
  std::vector<double> simulate(std::span<const double> theta,
                               RngStream& rng) const override;
  double rho() const { return rho_; }

 private:
  double rho_;
};

/// SLCP-with-distractors internals exposed for verification: the frozen
/// coordinate permutation applied to the raw observation vector. Throws
/// std::invalid_argument for other tasks.
const std::vector<int>& slcp_permutation(const Task& task);

}  // namespace canvi
