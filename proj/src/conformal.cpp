#include "canvi/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "canvi/stats.hpp"

namespace canvi {

double score(const PosteriorModel& model, std::span<const double> x,
             std::span<const double> theta) {
  const double ld = model.log_density(theta, x);
  // exp(-(-inf)) = +inf gives the zero-density convention for free.
  return std::exp(-ld);
}

CalibratedPredictor calibrate(std::shared_ptr<const PosteriorModel> model,
                              const JointDataset& calibration, double alpha) {
  if (!model) throw std::invalid_argument("calibrate: null model");
  if (calibration.size() == 0) {
    throw std::invalid_argument("calibrate: empty calibration set");
  }
  std::vector<double> scores(calibration.size());
  for (std::size_t i = 0; i < calibration.size(); ++i) {
    scores[i] = score(*model, calibration.x(i), calibration.theta(i));
  }
  CalibratedPredictor pred;
  pred.threshold = conformal_quantile(scores, alpha);
  pred.alpha = alpha;
  pred.calibration_size = calibration.size();
  pred.model = std::move(model);
  return pred;
}

bool contains(const CalibratedPredictor& predictor, std::span<const double> x,
              std::span<const double> theta) {
  return score(*predictor.model, x, theta) <= predictor.threshold;
}

double hdr_threshold(const PosteriorModel& model, std::span<const double> x,
                     double alpha, int m_samples, RngStream& rng) {
  if (m_samples < 1) throw std::invalid_argument("hdr_threshold: m_samples must be >= 1");
  auto densities = model.sample_densities(x, m_samples, rng);
  // Empirical alpha-quantile of the density draws: the 1-alpha upper mass
  // stays above the cutoff.
  const auto k = static_cast<std::size_t>(
      std::max<long>(1, std::lround(std::ceil(alpha * m_samples - 1e-9))));
  std::nth_element(densities.begin(), densities.begin() + (k - 1), densities.end());
  return densities[k - 1];
}

CoveragePoint assess_coverage(const CalibratedPredictor& predictor,
                              const std::vector<JointDataset>& batches) {
  std::vector<double> per_batch;
  per_batch.reserve(batches.size());
  for (const auto& batch : batches) {
    std::size_t hit = 0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      if (contains(predictor, batch.x(i), batch.theta(i))) ++hit;
    }
    per_batch.push_back(static_cast<double>(hit) / batch.size());
  }
  return CoveragePoint{1.0 - predictor.alpha, mean(per_batch),
                       standard_error(per_batch)};
}

CoveragePoint assess_coverage(const HdrPredictor& predictor,
                              const std::vector<JointDataset>& batches,
                              RngStream rng) {
  std::vector<double> per_batch;
  per_batch.reserve(batches.size());
  for (std::size_t b = 0; b < batches.size(); ++b) {
    const auto& batch = batches[b];
    RngStream batch_rng = rng.substream(b);
    std::size_t hit = 0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      RngStream point_rng = batch_rng.substream(i);
      const double zeta = hdr_threshold(*predictor.model, batch.x(i),
                                        predictor.alpha, predictor.m_samples,
                                        point_rng);
      const double q = std::exp(predictor.model->log_density(batch.theta(i), batch.x(i)));
      if (q >= zeta) ++hit;
    }
    per_batch.push_back(static_cast<double>(hit) / batch.size());
  }
  return CoveragePoint{1.0 - predictor.alpha, mean(per_batch),
                       standard_error(per_batch)};
}

std::vector<JointDataset> draw_test_batches(const Task& task, std::size_t n_test,
                                            std::size_t n_batches,
                                            const RngStream& rng) {
  if (n_test < 1 || n_batches < 1) {
    throw std::invalid_argument("draw_test_batches: sizes must be >= 1");
  }
  std::vector<JointDataset> batches;
  batches.reserve(n_batches);
  for (std::size_t b = 0; b < n_batches; ++b) {
    batches.push_back(sample_joint(task, n_test, rng.substream(b), DatasetRole::test));
  }
  return batches;
}

CoveragePoint assess_coverage(const CalibratedPredictor& predictor, const Task& task,
                              std::size_t n_test, std::size_t n_batches,
                              RngStream rng) {
  return assess_coverage(predictor, draw_test_batches(task, n_test, n_batches, rng));
}

CoveragePoint assess_coverage(const HdrPredictor& predictor, const Task& task,
                              std::size_t n_test, std::size_t n_batches,
                              RngStream rng) {
  return assess_coverage(predictor,
                         draw_test_batches(task, n_test, n_batches, rng.substream(0)),
                         rng.substream(1));
}

bool transform_equivalence_check(const PosteriorModel& model, const JointDataset& data,
                                 double alpha, const std::function<double(double)>& f,
                                 RngStream rng, std::size_t n_probes) {
  if (data.size() == 0) {
    throw std::invalid_argument("transform_equivalence_check: empty dataset");
  }
  std::vector<double> raw(data.size());
  std::vector<double> mapped(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    raw[i] = score(model, data.x(i), data.theta(i));
    mapped[i] = f(raw[i]);
  }
  const double q_raw = conformal_quantile(raw, alpha);
  const double q_mapped = conformal_quantile(mapped, alpha);

  for (std::size_t p = 0; p < n_probes; ++p) {
    const auto x = data.x(p % data.size());
    RngStream probe = rng.substream(p);
    const auto theta = model.sample(x, probe);
    const double s = score(model, x, theta);
    const bool in_raw = s <= q_raw;
    const bool in_mapped = f(s) <= q_mapped;
    if (in_raw != in_mapped) return false;
  }
  return true;
}

}  // namespace canvi
