#include "canvi/task.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "canvi/errors.hpp"
#include "canvi/stats.hpp"

namespace canvi {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Substream labels for randomness frozen at task construction.
constexpr std::uint64_t kFrozenMixture = 0xF01;
constexpr std::uint64_t kFrozenPermutation = 0xF02;
constexpr std::uint64_t kFrozenStimulus = 0xF03;

std::vector<Interval> boxes(int dim, double lo, double hi) {
  return std::vector<Interval>(static_cast<std::size_t>(dim), Interval{lo, hi});
}

void check_theta_dim(const TaskSpec& spec, std::span<const double> theta) {
  if (static_cast<int>(theta.size()) != spec.theta_dim) {
    throw std::invalid_argument(spec.name + ": theta has wrong dimension");
  }
}

}  // namespace

bool Interval::bounded() const { return std::isfinite(lo) && std::isfinite(hi); }

std::string to_string(DatasetRole role) {
  switch (role) {
    case DatasetRole::train: return "train";
    case DatasetRole::calibration: return "calibration";
    case DatasetRole::test: return "test";
    case DatasetRole::recalibration: return "recalibration";
  }
  return "train";
}

DatasetRole dataset_role_from_string(const std::string& s) {
  if (s == "train") return DatasetRole::train;
  if (s == "calibration") return DatasetRole::calibration;
  if (s == "test") return DatasetRole::test;
  if (s == "recalibration") return DatasetRole::recalibration;
  throw std::invalid_argument("unknown dataset role: " + s);
}

// ---------------------------------------------------------------------------
// Gaussian linear family

class GaussianLinearTask : public Task {
 public:
  explicit GaussianLinearTask(bool uniform_prior) : uniform_prior_(uniform_prior) {
    spec_.name = uniform_prior ? "gaussian_linear_uniform" : "gaussian_linear";
    spec_.theta_dim = 10;
    spec_.x_dim = 10;
    spec_.theta_support = uniform_prior ? boxes(10, -1.0, 1.0) : boxes(10, -kInf, kInf);
  }

  std::vector<double> sample_prior(RngStream& rng) const override {
    std::vector<double> theta(10);
    for (double& t : theta) {
      t = uniform_prior_ ? rng.uniform(-1.0, 1.0) : rng.normal(0.0, std::sqrt(0.1));
    }
    return theta;
  }

  std::vector<double> simulate(std::span<const double> theta,
                               RngStream& rng) const override {
    check_theta_dim(spec_, theta);
    std::vector<double> x(10);
    for (int i = 0; i < 10; ++i) x[i] = rng.normal(theta[i], std::sqrt(0.1));
    return x;
  }

 private:
  bool uniform_prior_;
};

// ---------------------------------------------------------------------------
// SLCP with distractors

class SlcpDistractorsTask : public Task {
 public:
  explicit SlcpDistractorsTask(std::uint64_t task_seed) {
    spec_.name = "slcp_distractors";
    spec_.theta_dim = 5;
    spec_.x_dim = 100;
    spec_.theta_support = boxes(5, -3.0, 3.0);

    // Distractor mixture: 20 bivariate Student-t components with parameters
    // drawn once and frozen. Non-SPD covariance draws are rejected.
    RngStream mix = RngStream(task_seed, kFrozenMixture);
    comps_.resize(20);
    for (auto& c : comps_) {
      c.mu = {mix.normal(0.0, 15.0), mix.normal(0.0, 15.0)};
      for (;;) {
        const double d1 = 3.0 * std::exp(mix.normal());
        const double d2 = 3.0 * std::exp(mix.normal());
        const double off = mix.normal(0.0, 3.0);
        if (d1 * d2 - off * off > 0.0) {
          // Cholesky of [[d1, off], [off, d2]].
          c.l11 = std::sqrt(d1);
          c.l21 = off / c.l11;
          c.l22 = std::sqrt(d2 - c.l21 * c.l21);
          break;
        }
      }
    }

    RngStream perm = RngStream(task_seed, kFrozenPermutation);
    permutation_.resize(100);
    std::iota(permutation_.begin(), permutation_.end(), 0);
    for (int i = 99; i > 0; --i) {
      const int j = static_cast<int>(perm.uniform01() * (i + 1));
      std::swap(permutation_[i], permutation_[j]);
    }
  }

  std::vector<double> sample_prior(RngStream& rng) const override {
    std::vector<double> theta(5);
    for (double& t : theta) t = rng.uniform(-3.0, 3.0);
    return theta;
  }

  std::vector<double> simulate(std::span<const double> theta,
                               RngStream& rng) const override {
    check_theta_dim(spec_, theta);
    std::vector<double> y(100);
    const double a = theta[2] * theta[2];
    const double b = theta[3] * theta[3];
    const double t = std::tanh(theta[4]);
    // Cholesky of [[a^2, a b t], [a b t, b^2]].
    const double l11 = a;
    const double l21 = b * t;
    const double l22 = b * std::sqrt(std::max(0.0, 1.0 - t * t));
    for (int i = 0; i < 4; ++i) {
      const double z1 = rng.normal();
      const double z2 = rng.normal();
      y[2 * i] = theta[0] + l11 * z1;
      y[2 * i + 1] = theta[1] + l21 * z1 + l22 * z2;
    }
    for (int i = 0; i < 46; ++i) {
      const auto& c = comps_[static_cast<int>(rng.uniform01() * 20.0)];
      const double z1 = rng.normal();
      const double z2 = rng.normal();
      // Student-t with 2 dof: Gaussian scaled by sqrt(2 / chi^2_2).
      const double w = -2.0 * std::log(rng.uniform_open01());
      const double s = std::sqrt(2.0 / w);
      y[8 + 2 * i] = c.mu[0] + s * (c.l11 * z1);
      y[8 + 2 * i + 1] = c.mu[1] + s * (c.l21 * z1 + c.l22 * z2);
    }
    std::vector<double> x(100);
    for (int i = 0; i < 100; ++i) x[i] = y[permutation_[i]];
    return x;
  }

  const std::vector<int>& permutation() const { return permutation_; }

 private:
  struct Component {
    std::array<double, 2> mu;
    double l11, l21, l22;
  };
  std::vector<Component> comps_;
  std::vector<int> permutation_;
};

const std::vector<int>& slcp_permutation(const Task& task) {
  const auto* slcp = dynamic_cast<const SlcpDistractorsTask*>(&task);
  if (slcp == nullptr) {
    throw std::invalid_argument("slcp_permutation: task is not slcp_distractors");
  }
  return slcp->permutation();
}

// ---------------------------------------------------------------------------
// Bernoulli GLM with raw observations

class BernoulliGlmRawTask : public Task {
 public:
  explicit BernoulliGlmRawTask(std::uint64_t task_seed) {
    spec_.name = "bernoulli_glm_raw";
    spec_.theta_dim = 10;
    spec_.x_dim = kStimulusLen;
    spec_.theta_support = boxes(10, -kInf, kInf);

    // Smoothing prior on the 9-dim filter: f ~ N(0, (F^T F)^{-1}) with
    // F lower-triangular banded; draws use f = F^{-1} z by forward
    // substitution.
    for (int i = 0; i < 9; ++i) {
      f_diag_[i] = 1.0 + std::sqrt(static_cast<double>(i) / 9.0);
    }

    RngStream stim = RngStream(task_seed, kFrozenStimulus);
    stimulus_.resize(kStimulusLen);
    for (double& v : stimulus_) v = stim.normal();
  }

  std::vector<double> sample_prior(RngStream& rng) const override {
    std::vector<double> theta(10);
    theta[0] = rng.normal(0.0, std::sqrt(2.0));
    double z[9];
    for (double& v : z) v = rng.normal();
    double f[9];
    for (int i = 0; i < 9; ++i) {
      double s = z[i];
      if (i >= 1) s -= -2.0 * f[i - 1];
      if (i >= 2) s -= 1.0 * f[i - 2];
      f[i] = s / f_diag_[i];
    }
    for (int i = 0; i < 9; ++i) theta[1 + i] = f[i];
    return theta;
  }

  std::vector<double> simulate(std::span<const double> theta,
                               RngStream& rng) const override {
    check_theta_dim(spec_, theta);
    std::vector<double> x(kStimulusLen);
    for (int i = 0; i < kStimulusLen; ++i) {
      double lin = theta[0];
      for (int j = 0; j < 9; ++j) {
        if (i - j >= 0) lin += stimulus_[i - j] * theta[1 + j];
      }
      const double p = 1.0 / (1.0 + std::exp(-lin));
      x[i] = static_cast<double>(rng.bernoulli(p));
    }
    return x;
  }

  static constexpr int kStimulusLen = 100;

 private:
  std::array<double, 9> f_diag_{};
  std::vector<double> stimulus_;
};

// ---------------------------------------------------------------------------
// Gaussian mixture

class GaussianMixtureTask : public Task {
 public:
  GaussianMixtureTask() {
    spec_.name = "gaussian_mixture";
    spec_.theta_dim = 2;
    spec_.x_dim = 2;
    spec_.theta_support = boxes(2, -10.0, 10.0);
  }

  std::vector<double> sample_prior(RngStream& rng) const override {
    return {rng.uniform(-10.0, 10.0), rng.uniform(-10.0, 10.0)};
  }

  std::vector<double> simulate(std::span<const double> theta,
                               RngStream& rng) const override {
    check_theta_dim(spec_, theta);
    const double sd = rng.bernoulli(0.5) ? 1.0 : 0.1;
    return {rng.normal(theta[0], sd), rng.normal(theta[1], sd)};
  }
};

// ---------------------------------------------------------------------------
// Two moons

std::array<double, 2> two_moons_forward(std::span<const double> theta, double a,
                                        double r) {
  const double s2 = std::sqrt(2.0);
  return {r * std::cos(a) + 0.25 - std::abs(theta[0] + theta[1]) / s2,
          r * std::sin(a) + (-theta[0] + theta[1]) / s2};
}

class TwoMoonsTask : public Task {
 public:
  TwoMoonsTask() {
    spec_.name = "two_moons";
    spec_.theta_dim = 2;
    spec_.x_dim = 2;
    spec_.theta_support = boxes(2, -1.0, 1.0);
  }

  std::vector<double> sample_prior(RngStream& rng) const override {
    return {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
  }

  std::vector<double> simulate(std::span<const double> theta,
                               RngStream& rng) const override {
    check_theta_dim(spec_, theta);
    const double a = rng.uniform(-M_PI / 2.0, M_PI / 2.0);
    const double r = rng.normal(0.1, 0.01);
    const auto x = two_moons_forward(theta, a, r);
    return {x[0], x[1]};
  }
};

// ---------------------------------------------------------------------------
// SIR epidemic model

class SirTask : public Task {
 public:
  SirTask() {
    spec_.name = "sir";
    spec_.theta_dim = 2;
    spec_.x_dim = 10;
    spec_.theta_support = boxes(2, 0.0, kInf);
  }

  std::vector<double> sample_prior(RngStream& rng) const override {
    return {rng.lognormal(std::log(0.4), 0.5), rng.lognormal(std::log(0.125), 0.2)};
  }

  std::vector<double> simulate(std::span<const double> theta,
                               RngStream& rng) const override {
    check_theta_dim(spec_, theta);
    const auto infected = integrate(theta);
    std::vector<double> x(10);
    for (int k = 0; k < 10; ++k) {
      x[k] = static_cast<double>(rng.binomial(1000, infected[k] / kPopulation));
    }
    return x;
  }

  /// Infected counts at the 10 observation times; exposed for the
  /// conservation checks.
  std::vector<double> integrate(std::span<const double> theta) const {
    const double beta = theta[0];
    const double gamma = theta[1];
    double s = kPopulation - 1.0;
    double i = 1.0;
    double r = 0.0;
    auto deriv = [&](double S, double I, double& dS, double& dI, double& dR) {
      dS = -beta * S * I / kPopulation;
      dI = beta * S * I / kPopulation - gamma * I;
      dR = gamma * I;
    };
    std::vector<double> out;
    out.reserve(10);
    const int steps_per_obs = kSteps / 10;
    for (int step = 1; step <= kSteps; ++step) {
      rk4_step(deriv, s, i, r, kDt);
      if (!std::isfinite(s) || !std::isfinite(i) || !std::isfinite(r)) {
        throw SimulationError("sir: non-finite state",
                              {theta.begin(), theta.end()});
      }
      if (step % steps_per_obs == 0) out.push_back(std::max(0.0, i));
    }
    return out;
  }

  static constexpr double kPopulation = 1'000'000.0;
  static constexpr double kDt = 0.1;
  static constexpr int kSteps = 1600;  // horizon 160

  template <typename F>
  static void rk4_step(F&& deriv, double& s, double& i, double& r, double h) {
    double k1s, k1i, k1r, k2s, k2i, k2r, k3s, k3i, k3r, k4s, k4i, k4r;
    deriv(s, i, k1s, k1i, k1r);
    deriv(s + 0.5 * h * k1s, i + 0.5 * h * k1i, k2s, k2i, k2r);
    deriv(s + 0.5 * h * k2s, i + 0.5 * h * k2i, k3s, k3i, k3r);
    deriv(s + h * k3s, i + h * k3i, k4s, k4i, k4r);
    s += h / 6.0 * (k1s + 2.0 * k2s + 2.0 * k3s + k4s);
    i += h / 6.0 * (k1i + 2.0 * k2i + 2.0 * k3i + k4i);
    r += h / 6.0 * (k1r + 2.0 * k2r + 2.0 * k3r + k4r);
  }
};

std::vector<std::array<double, 3>> sir_trajectory(std::span<const double> theta) {
  const double beta = theta[0];
  const double gamma = theta[1];
  const double n = SirTask::kPopulation;
  double s = n - 1.0;
  double i = 1.0;
  double r = 0.0;
  auto deriv = [&](double S, double I, double& dS, double& dI, double& dR) {
    dS = -beta * S * I / n;
    dI = beta * S * I / n - gamma * I;
    dR = gamma * I;
  };
  std::vector<std::array<double, 3>> out;
  out.reserve(SirTask::kSteps + 1);
  out.push_back({s, i, r});
  for (int step = 1; step <= SirTask::kSteps; ++step) {
    SirTask::rk4_step(deriv, s, i, r, SirTask::kDt);
    out.push_back({s, i, r});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Lotka-Volterra

class LotkaVolterraTask : public Task {
 public:
  LotkaVolterraTask() {
    spec_.name = "lotka_volterra";
    spec_.theta_dim = 4;
    spec_.x_dim = 20;
    spec_.theta_support = boxes(4, 0.0, kInf);
  }

  std::vector<double> sample_prior(RngStream& rng) const override {
    return {rng.lognormal(-0.125, 0.5), rng.lognormal(-3.0, 0.5),
            rng.lognormal(-0.125, 0.5), rng.lognormal(-3.0, 0.5)};
  }

  std::vector<double> simulate(std::span<const double> theta,
                               RngStream& rng) const override {
    check_theta_dim(spec_, theta);
    const auto traj = integrate(theta);
    std::vector<double> out(20);
    for (int k = 0; k < 10; ++k) {
      out[k] = rng.lognormal(std::log(traj[k][0]), 0.1);
      out[10 + k] = rng.lognormal(std::log(traj[k][1]), 0.1);
    }
    return out;
  }

  /// (prey, predator) at the 10 observation times; throws SimulationError on
  /// loss of positivity so downstream code never sees NaN.
  std::vector<std::array<double, 2>> integrate(std::span<const double> theta) const {
    const double alpha = theta[0], beta = theta[1];
    const double gamma = theta[2], delta = theta[3];
    double x = 30.0;
    double y = 1.0;
    auto deriv = [&](double X, double Y, double& dX, double& dY) {
      dX = alpha * X - beta * X * Y;
      dY = -gamma * Y + delta * X * Y;
    };
    std::vector<std::array<double, 2>> out;
    out.reserve(10);
    const int steps = 200;  // horizon 20, step 0.1
    const int steps_per_obs = steps / 10;
    for (int step = 1; step <= steps; ++step) {
      double k1x, k1y, k2x, k2y, k3x, k3y, k4x, k4y;
      deriv(x, y, k1x, k1y);
      deriv(x + 0.05 * k1x, y + 0.05 * k1y, k2x, k2y);
      deriv(x + 0.05 * k2x, y + 0.05 * k2y, k3x, k3y);
      deriv(x + 0.1 * k3x, y + 0.1 * k3y, k4x, k4y);
      x += 0.1 / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
      y += 0.1 / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
      if (!std::isfinite(x) || !std::isfinite(y) || x <= 0.0 || y <= 0.0) {
        throw SimulationError("lotka_volterra: trajectory left the positive quadrant",
                              {theta.begin(), theta.end()});
      }
      if (step % steps_per_obs == 0) out.push_back({x, y});
    }
    return out;
  }
};

// ---------------------------------------------------------------------------
// ARCH

std::vector<double> arch_forward(std::span<const double> theta,
                                 std::span<const double> xi) {
  std::vector<double> y(xi.size());
  double e_prev = 0.0;
  double y_prev = 0.0;
  for (std::size_t t = 0; t < xi.size(); ++t) {
    const double e = xi[t] * std::sqrt(0.2 + theta[1] * e_prev * e_prev);
    y[t] = theta[0] * y_prev + e;
    e_prev = e;
    y_prev = y[t];
  }
  return y;
}

double arch_log_likelihood(std::span<const double> theta,
                           std::span<const double> y_series) {
  double ll = 0.0;
  double e_prev = 0.0;
  double y_prev = 0.0;
  for (std::size_t t = 0; t < y_series.size(); ++t) {
    const double var = 0.2 + theta[1] * e_prev * e_prev;
    if (!(var > 0.0)) {
      throw std::domain_error("arch_log_likelihood: non-positive conditional variance");
    }
    const double e = y_series[t] - theta[0] * y_prev;
    ll += -0.5 * std::log(2.0 * M_PI * var) - 0.5 * e * e / var;
    e_prev = e;
    y_prev = y_series[t];
  }
  return ll;
}

class ArchTask : public Task {
 public:
  ArchTask() {
    spec_.name = "arch";
    spec_.theta_dim = 2;
    spec_.x_dim = 100;
    spec_.theta_support = {Interval{-1.0, 1.0}, Interval{0.0, 1.0}};
  }

  std::vector<double> sample_prior(RngStream& rng) const override {
    return {rng.uniform(-1.0, 1.0), rng.uniform(0.0, 1.0)};
  }

  std::vector<double> simulate(std::span<const double> theta,
                               RngStream& rng) const override {
    check_theta_dim(spec_, theta);
    std::vector<double> xi(100);
    for (double& v : xi) v = rng.normal();
    return arch_forward(theta, xi);
  }
};

// ---------------------------------------------------------------------------
// Bivariate Gaussian (analytic reference)

BivariateGaussianTask::BivariateGaussianTask(double rho) : rho_(rho) {
  if (!(std::abs(rho) < 1.0)) {
    throw std::domain_error("bivariate_gaussian: |rho| must be < 1");
  }
  spec_.name = "bivariate_gaussian";
  spec_.theta_dim = 1;
  spec_.x_dim = 1;
  spec_.theta_support = boxes(1, -kInf, kInf);
}

std::vector<double> BivariateGaussianTask::sample_prior(RngStream& rng) const {
  return {rng.normal()};
}

std::vector<double> BivariateGaussianTask::simulate(std::span<const double> theta,
                                                    RngStream& rng) const {
  check_theta_dim(spec_, theta);
  return {rng.normal(rho_ * theta[0], std::sqrt(1.0 - rho_ * rho_))};
}

// ---------------------------------------------------------------------------

std::unique_ptr<Task> make_task(const std::string& name, std::uint64_t task_seed,
                                double rho) {
  if (name == "gaussian_linear") return std::make_unique<GaussianLinearTask>(false);
  if (name == "gaussian_linear_uniform") {
    return std::make_unique<GaussianLinearTask>(true);
  }
  if (name == "slcp_distractors") {
    return std::make_unique<SlcpDistractorsTask>(task_seed);
  }
  if (name == "bernoulli_glm_raw") {
    return std::make_unique<BernoulliGlmRawTask>(task_seed);
  }
  if (name == "gaussian_mixture") return std::make_unique<GaussianMixtureTask>();
  if (name == "two_moons") return std::make_unique<TwoMoonsTask>();
  if (name == "sir") return std::make_unique<SirTask>();
  if (name == "lotka_volterra") return std::make_unique<LotkaVolterraTask>();
  if (name == "arch") return std::make_unique<ArchTask>();
  if (name == "bivariate_gaussian") {
    return std::make_unique<BivariateGaussianTask>(rho);
  }
  throw std::invalid_argument("unknown task: " + name);
}

std::vector<std::string> task_names() {
  return {"gaussian_linear", "gaussian_linear_uniform", "slcp_distractors",
          "bernoulli_glm_raw", "gaussian_mixture", "two_moons",
          "sir", "lotka_volterra", "arch", "bivariate_gaussian"};
}

JointDataset sample_joint(const Task& task, std::size_t n, const RngStream& rng,
                          DatasetRole role) {
  if (n < 1) throw std::invalid_argument("sample_joint: n must be >= 1");
  const auto& spec = task.spec();
  JointDataset ds;
  ds.task_name = spec.name;
  ds.role = role;
  ds.seed = rng.seed();
  ds.stream_id = rng.stream_id();
  ds.theta_dim = spec.theta_dim;
  ds.x_dim = spec.x_dim;
  ds.thetas.resize(n * spec.theta_dim);
  ds.xs.resize(n * spec.x_dim);
  for (std::size_t i = 0; i < n; ++i) {
    RngStream sub = rng.substream(i);
    const auto theta = task.sample_prior(sub);
    const auto x = task.simulate(theta, sub);
    std::copy(theta.begin(), theta.end(), ds.thetas.begin() + i * spec.theta_dim);
    std::copy(x.begin(), x.end(), ds.xs.begin() + i * spec.x_dim);
  }
  return ds;
}

}  // namespace canvi
