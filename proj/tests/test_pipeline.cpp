#include <cmath>
#include <stdexcept>

#include "canvi/conformal.hpp"
#include "canvi/dataset_io.hpp"
#include "canvi/pipeline.hpp"
#include "canvi/report_io.hpp"
#include "canvi/stats.hpp"
#include "doctest.h"
#include "support_models.hpp"

using namespace canvi;

namespace {

CanviConfig gaussian_config() {
  CanviConfig cfg;
  cfg.task = "bivariate_gaussian";
  cfg.rho = 0.3;
  cfg.alpha = 0.05;
  cfg.n_calibration = 2000;
  cfg.n_test = 50;
  cfg.n_mc_samples = 4000;
  cfg.coverage_batches = 3;
  cfg.coverage_batch_size = 2000;
  cfg.seed = 7;
  for (double phi : {0.0, 0.3, 0.9}) {
    CandidateSpec spec;
    spec.family = "clg";
    spec.phi = phi;
    cfg.candidates.push_back(spec);
  }
  return cfg;
}

}  // namespace

TEST_CASE("canvi selects the exact slope among gaussian candidates") {
  const auto report = run_canvi(gaussian_config());
  CHECK(report.selected == 1);  // phi = 0.3
  CHECK(report.candidates.size() == 3);
  for (const auto& c : report.candidates) CHECK_FALSE(c.failed);
  CHECK(report.candidates[1].inverse_efficiency <
        report.candidates[0].inverse_efficiency);
  CHECK(report.candidates[1].inverse_efficiency <
        report.candidates[2].inverse_efficiency);
  CHECK(report.candidates[1].inverse_efficiency ==
        doctest::Approx(gaussian_analytic_length(0.3, 0.3, 0.05)).epsilon(0.05));
  // Guard band covers both noise sources: the threshold's own sampling error
  // (~ binomial at N_C) and the test-side binomial error.
  const double band =
      3 * std::sqrt(0.05 * 0.95 * (1.0 / 2000 + 1.0 / 6000));
  CHECK(report.selected_coverage.coverage > 0.95 - band);
  CHECK(report.alpha_integral.has_value());
  CHECK(*report.alpha_integral > 0.0);
}

TEST_CASE("single candidate is selected and recalibrated on the fresh set") {
  auto cfg = gaussian_config();
  cfg.candidates.resize(1);
  cfg.candidates[0].phi = 0.3;
  const auto report = run_canvi(cfg);
  CHECK(report.selected == 0);

  // The recalibrated threshold must be a pure function of the fresh
  // recalibration set and the frozen model.
  const auto task = make_task_from_config(cfg);
  const auto d_recal = reproduce_dataset(cfg, DatasetRole::recalibration);
  CHECK(dataset_fingerprint(d_recal) == report.fingerprint_recalibration);
  const auto pred = calibrate(report.selected_model, d_recal, cfg.alpha);
  CHECK(pred.threshold == report.recalibrated_threshold);
}

TEST_CASE("identical configs produce identical reports") {
  const auto cfg = gaussian_config();
  const auto a = run_canvi(cfg);
  const auto b = run_canvi(cfg);
  CHECK(canvi_report_to_json(a, cfg) == canvi_report_to_json(b, cfg));
}

TEST_CASE("duplicated candidates break ties toward the lower index") {
  auto cfg = gaussian_config();
  cfg.candidates = {cfg.candidates[1], cfg.candidates[1], cfg.candidates[0]};
  const auto report = run_canvi(cfg);
  CHECK(report.selected == 0);
  CHECK(report.candidates[0].inverse_efficiency ==
        report.candidates[1].inverse_efficiency);
}

TEST_CASE("failed candidates are excluded; all-failed aborts") {
  auto cfg = gaussian_config();
  CandidateSpec bad;
  bad.family = "mdn";
  bad.train_steps = 40;
  bad.learning_rate = 1e12;  // diverges
  bad.n_components = 2;
  bad.hidden_width = 8;
  cfg.candidates = {bad, cfg.candidates[1]};
  const auto report = run_canvi(cfg);
  CHECK(report.candidates[0].failed);
  CHECK_FALSE(report.candidates[0].error.empty());
  CHECK(report.selected == 1);

  cfg.candidates = {bad};
  CHECK_THROWS_AS(run_canvi(cfg), std::runtime_error);
}

TEST_CASE("coverage holds post-selection with adversarial candidate sets") {
  auto cfg = gaussian_config();
  cfg.candidates.clear();
  for (double c : {0.5, 2.0}) {
    CandidateSpec spec;
    spec.family = "clg";
    spec.phi = 0.8;  // wrong slope
    spec.dispersion = c;
    cfg.candidates.push_back(spec);
  }
  const double se = std::sqrt(
      0.05 * 0.95 * (1.0 / cfg.n_calibration +
                     1.0 / (cfg.coverage_batches * cfg.coverage_batch_size)));
  for (std::uint64_t seed : {11, 12, 13, 14, 15}) {
    cfg.seed = seed;
    const auto report = run_canvi(cfg);
    CHECK(report.selected_coverage.coverage >= 0.95 - 3 * se);
  }
}

TEST_CASE("slack for a single candidate is centered near zero") {
  auto cfg = gaussian_config();
  cfg.candidates.resize(1);
  cfg.candidates[0].phi = 0.3;
  const auto stats = efficiency_slack_check(cfg, 12, {1000});
  REQUIRE(stats.slack.size() == 1);
  CHECK(stats.slack[0].size() == 12);
  // Selection plays no role: slack is the difference of two thresholds'
  // region sizes on the same model, a mean-zero quantity.
  CHECK(std::abs(stats.median_slack[0]) <
        0.2 * stats.median_best_efficiency[0]);
}

TEST_CASE("median slack shrinks with the calibration size") {
  const auto cfg = gaussian_config();
  const auto stats = efficiency_slack_check(cfg, 12, {400, 8000});
  std::vector<double> abs_med(2);
  for (int a = 0; a < 2; ++a) {
    std::vector<double> abs_slack = stats.slack[a];
    for (double& v : abs_slack) v = std::abs(v);
    std::sort(abs_slack.begin(), abs_slack.end());
    abs_med[a] = abs_slack[abs_slack.size() / 2];
  }
  CHECK(abs_med[1] <= abs_med[0]);
}

TEST_CASE("coverage sweep: exact model is calibrated, narrow hdr is not") {
  CanviConfig cfg;
  cfg.task = "bivariate_gaussian";
  cfg.rho = 0.3;
  cfg.n_calibration = 4000;
  cfg.coverage_batches = 4;
  cfg.coverage_batch_size = 2500;
  cfg.m_hdr = 100;
  cfg.seed = 21;
  CandidateSpec spec;
  spec.family = "clg";
  spec.phi = 0.3;
  spec.dispersion = 0.5;  // under-dispersed
  cfg.candidates = {spec};

  const std::vector<double> levels = {0.5, 0.8, 0.95};
  const auto [conformal, hdr] = coverage_sweep(cfg, levels);
  REQUIRE(conformal.points.size() == 3);
  REQUIRE(hdr.points.size() == 3);
  CHECK(conformal.predictor_kind == "conformal");
  CHECK(hdr.predictor_kind == "hdr");
  for (const auto& p : conformal.points) {
    CHECK(std::abs(p.coverage - p.level) < 0.03);
  }
  // Half-width regions of the under-dispersed model under-cover at 0.95.
  CHECK(hdr.points[2].coverage < 0.95 - 0.05);
}

TEST_CASE("a prior-wide degenerate candidate over-covers everywhere") {
  // Density identically equal to the prior on the bounded task: every score
  // ties, regions are the full box, and both curves sit at coverage 1.
  const auto task = make_task("two_moons");
  const canvi::testing::BoxUniformModel prior_model(
      {{-1.0, 1.0}, {-1.0, 1.0}}, 2);
  SweepOptions opt;
  opt.n_calibration = 300;
  opt.n_batches = 2;
  opt.batch_size = 250;
  opt.m_hdr = 50;
  opt.seed = 23;
  const std::vector<double> levels = {0.5, 0.9};
  const auto [conformal, hdr] = coverage_sweep(prior_model, *task, levels, opt);
  for (const auto& p : conformal.points) CHECK(p.coverage >= p.level);
  for (const auto& p : hdr.points) CHECK(p.coverage >= p.level);
}

TEST_CASE("workers do not change the sweep result") {
  CanviConfig cfg;
  cfg.task = "bivariate_gaussian";
  cfg.rho = 0.3;
  cfg.n_calibration = 500;
  cfg.coverage_batches = 3;
  cfg.coverage_batch_size = 400;
  cfg.seed = 22;
  CandidateSpec spec;
  spec.family = "clg";
  spec.phi = 0.3;
  cfg.candidates = {spec};

  const std::vector<double> levels = {0.6, 0.9};
  cfg.workers = 1;
  const auto serial = coverage_sweep(cfg, levels);
  cfg.workers = 4;
  const auto parallel = coverage_sweep(cfg, levels);
  for (std::size_t i = 0; i < levels.size(); ++i) {
    CHECK(serial.first.points[i].coverage == parallel.first.points[i].coverage);
    CHECK(serial.second.points[i].coverage == parallel.second.points[i].coverage);
  }
}

TEST_CASE("dispersion candidates on the time-series task calibrate uniformly") {
  // Three mis-dispersed variants of the same trained network: every
  // conformalized coverage lands at the nominal level regardless of c.
  CanviConfig cfg;
  cfg.task = "arch";
  cfg.alpha = 0.1;
  cfg.n_calibration = 5000;
  cfg.n_test = 20;
  cfg.n_mc_samples = 1000;
  cfg.coverage_batches = 5;
  cfg.coverage_batch_size = 2000;
  cfg.alpha_integral = false;
  cfg.seed = 31;
  for (double c : {0.5, 1.0, 2.0}) {
    CandidateSpec spec;
    spec.family = "mdn";
    spec.n_components = 4;
    spec.hidden_width = 24;
    spec.train_steps = 300;
    spec.train_batch = 64;
    spec.dispersion = c;
    cfg.candidates.push_back(spec);
  }
  const auto report = run_canvi(cfg);
  for (const auto& cand : report.candidates) {
    REQUIRE_FALSE(cand.failed);
    CHECK(std::abs(cand.coverage.coverage - 0.9) <= 0.02);
  }
}

TEST_CASE("config validation") {
  CanviConfig cfg;
  cfg.candidates.clear();
  CHECK_THROWS_AS(run_canvi(cfg), std::invalid_argument);
  cfg = CanviConfig{};
  CandidateSpec spec;
  spec.family = "clg";
  cfg.candidates = {spec};
  cfg.alpha = 1.5;
  CHECK_THROWS_AS(run_canvi(cfg), std::invalid_argument);
}
