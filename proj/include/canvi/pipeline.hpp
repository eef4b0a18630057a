#pragma once

#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "canvi/conformal.hpp"
#include "canvi/efficiency.hpp"
#include "canvi/model.hpp"
#include "canvi/task.hpp"

namespace canvi {

/// One candidate approximator: the family plus its build/training knobs.
/// dispersion != 1 wraps the built model in a dispersion-scaled copy.
struct CandidateSpec {
  std::string family = "mdn";  // "mdn" or "clg"
  std::string label;           // report label; defaulted when empty

  // clg
  double phi = 0.0;
  /// Conditional variance; NaN means task default (1 - rho^2 on the
  /// correlated-Gaussian task, 1 otherwise).
  double variance = std::numeric_limits<double>::quiet_NaN();

  // mdn
  int n_components = 10;
  int hidden_width = 64;
  int hidden_depth = 2;
  long train_steps = 5000;
  int train_batch = 128;
  double learning_rate = 1e-3;

  double dispersion = 1.0;
};

struct CanviConfig {
  std::string task = "two_moons";
  std::uint64_t task_seed = 0;
  double rho = 0.3;  // bivariate_gaussian only

  std::vector<CandidateSpec> candidates;

  double alpha = 0.05;
  std::size_t n_calibration = 10'000;  // N_C (also |D_R|)
  std::size_t n_test = 100;            // N_T
  std::size_t n_mc_samples = 10'000;   // S per test point
  int m_hdr = 100;

  std::size_t coverage_batches = 5;
  std::size_t coverage_batch_size = 2'000;

  std::uint64_t seed = 1;
  int workers = 1;
  bool alpha_integral = true;
};

struct CandidateResult {
  std::string label;
  bool failed = false;
  std::string error;
  double threshold = 0.0;            // calibration-set conformal quantile
  double inverse_efficiency = 0.0;   // mean region size on the test set
  double inverse_efficiency_se = 0.0;
  CoveragePoint coverage;            // post-hoc conformal coverage, fresh data
};

struct CanviReport {
  std::vector<CandidateResult> candidates;
  int selected = -1;
  double recalibrated_threshold = 0.0;
  double recalibrated_efficiency = 0.0;
  double recalibrated_efficiency_se = 0.0;
  CoveragePoint selected_coverage;  // recalibrated predictor on fresh data
  /// Trapezoid estimate of the selected candidate's region size integrated
  /// over alpha (exploratory; no acceptance semantics).
  std::optional<double> alpha_integral;

  std::string fingerprint_calibration;
  std::string fingerprint_test;
  std::string fingerprint_recalibration;
  std::uint64_t seed = 0;

  std::shared_ptr<const PosteriorModel> selected_model;
  CalibratedPredictor selected_predictor;  // recalibrated on D_R
};

/// A constructed (and, for trainable families, trained) candidate.
struct BuiltCandidate {
  std::string label;
  std::shared_ptr<const PosteriorModel> model;  // null when failed
  bool failed = false;
  std::string error;
};

std::unique_ptr<Task> make_task_from_config(const CanviConfig& config);

/// Builds every candidate; training failures are recorded, not thrown.
std::vector<BuiltCandidate> build_candidates(const CanviConfig& config,
                                             const Task& task);

/// The full selection procedure: draw calibration and test sets from
/// disjoint streams, calibrate and score every candidate, pick the most
/// efficient, then recalibrate it on a fresh set so the coverage guarantee
/// survives selection. Throws std::runtime_error if every candidate failed.
CanviReport run_canvi(const CanviConfig& config);

/// Regenerates the exact dataset run_canvi draws for the given role under
/// this config, for audits; its fingerprint matches the report's.
JointDataset reproduce_dataset(const CanviConfig& config, DatasetRole role);

/// Recalibration slack, replicated: slack = recalibrated efficiency minus the
/// best pre-selection efficiency, at each requested calibration size.
struct SlackStats {
  std::vector<std::size_t> n_calibration;
  std::vector<std::vector<double>> slack;      // [n_calib index][replicate]
  std::vector<double> median_slack;
  std::vector<double> median_best_efficiency;  // median over replicates of min_t lhat
};

SlackStats efficiency_slack_check(const CanviConfig& config, std::size_t n_replicates,
                                  std::vector<std::size_t> n_calibration_values = {
                                      1'000, 10'000});

/// Per-level calibration of the first candidate, assessed with and without
/// conformalization on shared test batches.
std::pair<CoverageCurve, CoverageCurve> coverage_sweep(const CanviConfig& config,
                                                       std::span<const double> levels);

/// Same sweep for a prebuilt model. Calibration scores and per-point
/// conditional density draws are computed once and reused across levels.
struct SweepOptions {
  std::size_t n_calibration = 10'000;
  std::size_t n_batches = 10;
  std::size_t batch_size = 10'000;
  int m_hdr = 100;
  std::uint64_t seed = 1;
  int workers = 1;
};

std::pair<CoverageCurve, CoverageCurve> coverage_sweep(const PosteriorModel& model,
                                                       const Task& task,
                                                       std::span<const double> levels,
                                                       const SweepOptions& options);

/// The standard level grid 0.05, 0.10, ..., 0.95.
std::vector<double> default_levels();

}  // namespace canvi
