#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "canvi/model.hpp"
#include "canvi/task.hpp"

namespace canvi {

/// Conformity score 1 / q(theta | x); zero density (log_density = -inf) maps
/// to +inf rather than an error so support mismatch stays representable.
double score(const PosteriorModel& model, std::span<const double> x,
             std::span<const double> theta);

/// A posterior approximator paired with its split-conformal threshold. The
/// region at x is { theta : score(x, theta) <= threshold }; threshold = +inf
/// means the region is the whole parameter domain for every x.
struct CalibratedPredictor {
  std::shared_ptr<const PosteriorModel> model;
  double threshold = 0.0;
  double alpha = 0.0;
  std::size_t calibration_size = 0;
};

CalibratedPredictor calibrate(std::shared_ptr<const PosteriorModel> model,
                              const JointDataset& calibration, double alpha);

/// Region membership; +inf <= +inf counts as inside (full-domain regions
/// include zero-density points).
bool contains(const CalibratedPredictor& predictor, std::span<const double> x,
              std::span<const double> theta);

/// Highest-density-region baseline: the per-x density cutoff, estimated as
/// the empirical alpha-quantile of M density values at i.i.d. conditional
/// draws, so the region { theta : q(theta|x) >= zeta } keeps roughly 1-alpha
/// of the approximate posterior mass.
double hdr_threshold(const PosteriorModel& model, std::span<const double> x,
                     double alpha, int m_samples, RngStream& rng);

/// HDR baseline predictor: model + level + number of density draws per point.
struct HdrPredictor {
  std::shared_ptr<const PosteriorModel> model;
  double alpha = 0.0;
  int m_samples = 100;
};

/// Empirical coverage at one nominal level, averaged over test batches.
struct CoveragePoint {
  double level = 0.0;  // nominal 1 - alpha
  double coverage = 0.0;
  double std_error = 0.0;
};

struct CoverageCurve {
  std::vector<CoveragePoint> points;
  std::string predictor_kind;  // "conformal" or "hdr"
  std::string task_name;
  std::uint64_t seed = 0;
};

/// Fraction of (x, theta) test pairs with theta inside the region, per batch;
/// returns the across-batch mean and standard error.
CoveragePoint assess_coverage(const CalibratedPredictor& predictor,
                              const std::vector<JointDataset>& batches);
CoveragePoint assess_coverage(const HdrPredictor& predictor,
                              const std::vector<JointDataset>& batches,
                              RngStream rng);

CoveragePoint assess_coverage(const CalibratedPredictor& predictor, const Task& task,
                              std::size_t n_test, std::size_t n_batches,
                              RngStream rng);
CoveragePoint assess_coverage(const HdrPredictor& predictor, const Task& task,
                              std::size_t n_test, std::size_t n_batches,
                              RngStream rng);

/// Test batches shared between predictor kinds at one level.
std::vector<JointDataset> draw_test_batches(const Task& task, std::size_t n_test,
                                            std::size_t n_batches,
                                            const RngStream& rng);

/// Checks that calibrating on f(score) with a strictly increasing f yields
/// exactly the same region membership as calibrating on the raw score, at
/// n_probes points (x cycled from the dataset, theta drawn from the model).
bool transform_equivalence_check(const PosteriorModel& model, const JointDataset& data,
                                 double alpha, const std::function<double(double)>& f,
                                 RngStream rng, std::size_t n_probes = 1000);

}  // namespace canvi
