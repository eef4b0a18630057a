#include <cmath>
#include <map>
#include <stdexcept>

#include "canvi/errors.hpp"
#include "canvi/task.hpp"
#include "doctest.h"

using namespace canvi;

TEST_CASE("task dimensions match the benchmark definitions") {
  const std::map<std::string, std::pair<int, int>> expected = {
      {"gaussian_linear", {10, 10}},        {"gaussian_linear_uniform", {10, 10}},
      {"slcp_distractors", {5, 100}},       {"bernoulli_glm_raw", {10, 100}},
      {"gaussian_mixture", {2, 2}},         {"two_moons", {2, 2}},
      {"sir", {2, 10}},                     {"lotka_volterra", {4, 20}},
      {"arch", {2, 100}},
  };
  for (const auto& [name, dims] : expected) {
    const auto task = make_task(name);
    CHECK(task->spec().theta_dim == dims.first);
    CHECK(task->spec().x_dim == dims.second);
    CHECK(task->spec().theta_support.size() ==
          static_cast<std::size_t>(dims.first));
  }
  CHECK_THROWS_AS(make_task("nope"), std::invalid_argument);
}

TEST_CASE("uniform-prior tasks have bounded support, lognormal tasks do not") {
  CHECK(make_task("two_moons")->spec().theta_support[0].bounded());
  CHECK(make_task("gaussian_mixture")->spec().theta_support[0].bounded());
  CHECK(make_task("arch")->spec().theta_support[1].bounded());
  CHECK_FALSE(make_task("sir")->spec().theta_support[0].bounded());
  CHECK_FALSE(make_task("gaussian_linear")->spec().theta_support[0].bounded());
}

TEST_CASE("two_moons prior stays in the unit box, sir prior is positive") {
  const auto moons = make_task("two_moons");
  const auto sir = make_task("sir");
  RngStream rng(11, 0);
  for (int i = 0; i < 2000; ++i) {
    RngStream sub = rng.substream(i);
    const auto theta = moons->sample_prior(sub);
    CHECK(theta[0] >= -1.0);
    CHECK(theta[0] <= 1.0);
    CHECK(theta[1] >= -1.0);
    CHECK(theta[1] <= 1.0);
    const auto st = sir->sample_prior(sub);
    CHECK(st[0] > 0.0);
    CHECK(st[1] > 0.0);
  }
}

TEST_CASE("gaussian_linear_uniform prior has per-dimension mean zero") {
  const auto task = make_task("gaussian_linear_uniform");
  RngStream rng(12, 0);
  const int n = 100000;
  std::vector<double> sums(10, 0.0);
  for (int i = 0; i < n; ++i) {
    RngStream sub = rng.substream(i);
    const auto theta = task->sample_prior(sub);
    for (int d = 0; d < 10; ++d) sums[d] += theta[d];
  }
  // U(-1,1): sd = 1/sqrt(3), se of the mean = sd / sqrt(n).
  const double se = (1.0 / std::sqrt(3.0)) / std::sqrt(static_cast<double>(n));
  for (int d = 0; d < 10; ++d) CHECK(std::abs(sums[d] / n) < 3.0 * se);
}

TEST_CASE("two_moons forward map at fixed noise") {
  const std::vector<double> origin = {0.0, 0.0};
  auto x = two_moons_forward(origin, 0.0, 0.1);
  CHECK(x[0] == doctest::Approx(0.35).epsilon(1e-12));
  CHECK(x[1] == doctest::Approx(0.0).epsilon(1e-12));

  const std::vector<double> ones = {1.0, 1.0};
  x = two_moons_forward(ones, 0.0, 0.1);
  CHECK(x[0] == doctest::Approx(0.35 - std::sqrt(2.0)).epsilon(1e-12));
  CHECK(x[1] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("arch recursion with unit innovations and theta = 0") {
  const std::vector<double> theta = {0.0, 0.0};
  const std::vector<double> xi(100, 1.0);
  const auto y = arch_forward(theta, xi);
  for (double v : y) CHECK(v == doctest::Approx(std::sqrt(0.2)).epsilon(1e-12));
}

TEST_CASE("arch log-likelihood closed form at theta = 0, y = 0") {
  const std::vector<double> theta = {0.0, 0.0};
  const std::vector<double> y(100, 0.0);
  // 100 * (-0.5 * log(2 pi 0.2)) = -11.421957698762255
  CHECK(arch_log_likelihood(theta, y) ==
        doctest::Approx(-11.421957698762255).epsilon(1e-12));
}

TEST_CASE("arch log-likelihood is sensitive to theta1") {
  const auto task = make_task("arch");
  RngStream rng(13, 0);
  const std::vector<double> truth = {0.3, 0.4};
  const auto y = task->simulate(truth, rng);
  const std::vector<double> t0 = {0.0, 0.4};
  const std::vector<double> t1 = {0.5, 0.4};
  CHECK(arch_log_likelihood(t0, y) != arch_log_likelihood(t1, y));
}

namespace {

// Term-by-term oracle on a short series: rebuild the residual sequence and
// sum scalar normal log-densities evaluated the pedestrian way.
double arch_ll_oracle(const std::vector<double>& theta, const std::vector<double>& y) {
  double ll = 0.0;
  std::vector<double> e(y.size() + 1, 0.0);
  std::vector<double> yy(y.size() + 1, 0.0);
  for (std::size_t t = 1; t <= y.size(); ++t) yy[t] = y[t - 1];
  for (std::size_t t = 1; t <= y.size(); ++t) {
    e[t] = yy[t] - theta[0] * yy[t - 1];
    const double sd = std::sqrt(0.2 + theta[1] * e[t - 1] * e[t - 1]);
    const double dens = std::exp(-0.5 * (e[t] / sd) * (e[t] / sd)) /
                        (sd * std::sqrt(2.0 * M_PI));
    ll += std::log(dens);
  }
  return ll;
}

}  // namespace

TEST_CASE("arch log-likelihood matches the term-by-term oracle on T=5") {
  const std::vector<double> theta = {0.4, 0.7};
  const std::vector<double> y = {0.3, -0.2, 0.9, 0.1, -0.5};
  CHECK(arch_log_likelihood(theta, y) ==
        doctest::Approx(arch_ll_oracle(theta, y)).epsilon(1e-12));
}

TEST_CASE("arch log-likelihood rejects non-positive conditional variance") {
  const std::vector<double> theta = {0.0, -10.0};
  const std::vector<double> y = {1.0, 1.0, 1.0};
  CHECK_THROWS_AS(arch_log_likelihood(theta, y), std::domain_error);
}

TEST_CASE("arch with theta2 = 0 behaves like a Gaussian AR(1)") {
  const auto task = make_task("arch");
  const double theta1 = 0.5;
  const std::vector<double> theta = {theta1, 0.0};
  RngStream rng(14, 0);
  const int reps = 10000;
  // y_T = theta1 * y_{T-1} + e_T with e_T independent of y_{T-1}, so the
  // regression slope E[y_T y_{T-1}] / E[y_{T-1}^2] is exactly theta1.
  double num = 0.0, den = 0.0;
  std::vector<double> resid(reps);
  for (int i = 0; i < reps; ++i) {
    RngStream sub = rng.substream(i);
    const auto y = task->simulate(theta, sub);
    num += y[99] * y[98];
    den += y[98] * y[98];
  }
  const double slope = num / den;
  double var_resid = 0.0;
  {
    RngStream rng2(14, 0);
    for (int i = 0; i < reps; ++i) {
      RngStream sub = rng2.substream(i);
      const auto y = task->simulate(theta, sub);
      const double r = y[99] * y[98] - slope * y[98] * y[98];
      var_resid += r * r;
    }
  }
  const double se = std::sqrt(var_resid / reps) / (den / reps) / std::sqrt(reps);
  CHECK(std::abs(slope - theta1) < 5.0 * se);
}

TEST_CASE("sir conserves the total population along the trajectory") {
  const std::vector<double> theta = {0.6, 0.15};
  const auto traj = sir_trajectory(theta);
  CHECK(traj.size() == 1601);
  for (const auto& state : traj) {
    const double total = state[0] + state[1] + state[2];
    CHECK(std::abs(total - 1e6) / 1e6 < 1e-6);
  }
}

TEST_CASE("sir observations are counts in [0, 1000]") {
  const auto task = make_task("sir");
  RngStream rng(15, 0);
  for (int i = 0; i < 50; ++i) {
    RngStream sub = rng.substream(i);
    const auto theta = task->sample_prior(sub);
    const auto x = task->simulate(theta, sub);
    CHECK(x.size() == 10);
    for (double v : x) {
      CHECK(v >= 0.0);
      CHECK(v <= 1000.0);
      CHECK(v == std::floor(v));
    }
  }
}

TEST_CASE("lotka_volterra stays positive or raises the simulation error") {
  const auto task = make_task("lotka_volterra");
  RngStream rng(16, 0);
  int ok = 0, failed = 0;
  for (int i = 0; i < 200; ++i) {
    RngStream sub = rng.substream(i);
    const auto theta = task->sample_prior(sub);
    try {
      const auto x = task->simulate(theta, sub);
      ++ok;
      for (double v : x) {
        CHECK(std::isfinite(v));
        CHECK(v > 0.0);
      }
    } catch (const SimulationError& e) {
      ++failed;
      CHECK(e.theta().size() == 4);
    }
  }
  CHECK(ok > 100);  // typical prior draws integrate fine
}

TEST_CASE("bernoulli_glm_raw outputs are bits") {
  const auto task = make_task("bernoulli_glm_raw");
  RngStream rng(17, 0);
  for (int i = 0; i < 50; ++i) {
    RngStream sub = rng.substream(i);
    const auto theta = task->sample_prior(sub);
    const auto x = task->simulate(theta, sub);
    for (double v : x) CHECK((v == 0.0 || v == 1.0));
  }
}

TEST_CASE("slcp distractors un-permuted head matches the theta structure") {
  const auto task = make_task("slcp_distractors", 123);
  const auto& perm = slcp_permutation(*task);
  std::vector<int> inverse(100);
  for (int i = 0; i < 100; ++i) inverse[perm[i]] = i;

  const std::vector<double> theta = {0.8, -1.1, 1.2, 0.9, 0.4};
  RngStream rng(18, 0);
  const int reps = 10000;
  std::vector<double> sums(8, 0.0);
  std::vector<double> sq(8, 0.0);
  for (int r = 0; r < reps; ++r) {
    RngStream sub = rng.substream(r);
    const auto x = task->simulate(theta, sub);
    for (int j = 0; j < 8; ++j) {
      const double v = x[inverse[j]];  // un-permute: raw coordinate j
      sums[j] += v;
      sq[j] += v * v;
    }
  }
  for (int j = 0; j < 8; ++j) {
    const double mean = sums[j] / reps;
    const double sd = std::sqrt(sq[j] / reps - mean * mean);
    const double se = sd / std::sqrt(static_cast<double>(reps));
    const double expected = (j % 2 == 0) ? theta[0] : theta[1];
    CHECK(std::abs(mean - expected) < 5.0 * se);
  }
}

TEST_CASE("sample_joint is deterministic per stream and diverges across streams") {
  const auto task = make_task("two_moons");
  const auto a = sample_joint(*task, 50, RngStream(21, 4), DatasetRole::calibration);
  const auto b = sample_joint(*task, 50, RngStream(21, 4), DatasetRole::calibration);
  CHECK(a.thetas == b.thetas);
  CHECK(a.xs == b.xs);

  const auto c = sample_joint(*task, 50, RngStream(21, 5), DatasetRole::test);
  for (std::size_t i = 0; i < 50; ++i) {
    CHECK(a.theta(i)[0] != c.theta(i)[0]);
  }
  CHECK(a.role == DatasetRole::calibration);
  CHECK(a.size() == 50);
  CHECK_THROWS_AS(sample_joint(*task, 0, RngStream(21, 6), DatasetRole::test),
                  std::invalid_argument);
}

TEST_CASE("sample_joint n=1 keeps dimensions") {
  const auto task = make_task("gaussian_mixture");
  const auto ds = sample_joint(*task, 1, RngStream(22, 0), DatasetRole::test);
  CHECK(ds.size() == 1);
  CHECK(ds.theta(0).size() == 2);
  CHECK(ds.x(0).size() == 2);
}

TEST_CASE("bivariate_gaussian marginals") {
  const auto task = make_task("bivariate_gaussian", 0, 0.3);
  RngStream rng(23, 0);
  const int n = 100000;
  double sum_t = 0, sum_x = 0, sum_tx = 0, sum_tt = 0, sum_xx = 0;
  for (int i = 0; i < n; ++i) {
    RngStream sub = rng.substream(i);
    const auto theta = task->sample_prior(sub);
    const auto x = task->simulate(theta, sub);
    sum_t += theta[0];
    sum_x += x[0];
    sum_tx += theta[0] * x[0];
    sum_tt += theta[0] * theta[0];
    sum_xx += x[0] * x[0];
  }
  const double corr = (sum_tx / n - sum_t / n * sum_x / n) /
                      std::sqrt((sum_tt / n - sum_t / n * sum_t / n) *
                                (sum_xx / n - sum_x / n * sum_x / n));
  CHECK(corr == doctest::Approx(0.3).epsilon(0.05));
  CHECK(sum_xx / n == doctest::Approx(1.0).epsilon(0.03));
}
