#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "canvi/rng.hpp"
#include "canvi/task.hpp"

namespace canvi {

/// Candidate amortized posterior approximator: conditional density
/// evaluation and conditional sampling. Implementations are immutable once
/// built and safe to share read-only across workers.
class PosteriorModel {
 public:
  virtual ~PosteriorModel() = default;

  virtual int theta_dim() const = 0;
  virtual int x_dim() const = 0;

  /// log q(theta | x); -inf when theta falls outside the family's support.
  virtual double log_density(std::span<const double> theta,
                             std::span<const double> x) const = 0;

  virtual std::vector<double> sample(std::span<const double> x,
                                     RngStream& rng) const = 0;

  /// Densities q(theta_j | x) at m i.i.d. conditional draws theta_j ~ q(.|x).
  /// Distributionally equivalent to sample-then-evaluate; families override
  /// it with a fused path that reuses the conditional parameters across
  /// draws (the region-size and density-cutoff estimators only need these
  /// values, never the draws themselves).
  virtual std::vector<double> sample_densities(std::span<const double> x,
                                               std::size_t m, RngStream& rng) const;

  /// Copy of this model with every conditional standard deviation scaled by
  /// c; backs the dispersion-scaled wrapper.
  virtual std::unique_ptr<PosteriorModel> clone_scaled(double c) const = 0;

  virtual std::string family() const = 0;
};

/// Per-dimension reparameterization between a constrained parameter space
/// and the unconstrained space a density model operates on.
///   identity:      u = theta
///   logit(lo,hi):  u = logit((theta - lo) / (hi - lo))   for bounded support
///   log:           u = log(theta)                         for positive support
class SupportTransform {
 public:
  enum class Kind { identity, logit, log };

  SupportTransform() = default;
  static SupportTransform identity(int dim);
  /// Chooses per dimension: logit on bounded intervals, log on (0, inf),
  /// identity otherwise.
  static SupportTransform for_support(const std::vector<Interval>& support);
  static SupportTransform from_parts(std::vector<Kind> kinds,
                                     std::vector<Interval> intervals);

  int dim() const { return static_cast<int>(kinds_.size()); }

  /// Returns false (u unusable) when theta is outside the support.
  bool to_unconstrained(std::span<const double> theta, std::span<double> u) const;
  void to_constrained(std::span<const double> u, std::span<double> theta) const;
  /// sum_d log |du_d / dtheta_d|; theta must be inside the support.
  double log_jacobian(std::span<const double> theta) const;
  /// Same quantity evaluated from the unconstrained point (numerically
  /// stable for draws made in u-space).
  double log_jacobian_from_u(std::span<const double> u) const;

  bool is_identity() const;

  const std::vector<Kind>& kinds() const { return kinds_; }
  const std::vector<Interval>& intervals() const { return intervals_; }

 private:
  std::vector<Kind> kinds_;
  std::vector<Interval> intervals_;
};

/// Gaussian conditional q(theta | x) = N(theta; slope * x + intercept, cov).
class ConditionalLinearGaussian : public PosteriorModel {
 public:
  /// slope is theta_dim x x_dim row-major; covariance must be SPD (checked
  /// via Cholesky; throws std::invalid_argument otherwise).
  ConditionalLinearGaussian(int theta_dim, int x_dim, std::vector<double> slope,
                            std::vector<double> intercept,
                            std::vector<double> covariance);

  /// 1-D convenience: q(theta | x) = N(theta; phi * x, variance).
  static ConditionalLinearGaussian scalar(double phi, double variance);

  int theta_dim() const override { return theta_dim_; }
  int x_dim() const override { return x_dim_; }
  double log_density(std::span<const double> theta,
                     std::span<const double> x) const override;
  std::vector<double> sample(std::span<const double> x,
                             RngStream& rng) const override;
  std::vector<double> sample_densities(std::span<const double> x, std::size_t m,
                                       RngStream& rng) const override;
  std::unique_ptr<PosteriorModel> clone_scaled(double c) const override;
  std::string family() const override { return "clg"; }

  const std::vector<double>& slope() const { return slope_; }
  const std::vector<double>& intercept() const { return intercept_; }
  const std::vector<double>& covariance() const { return covariance_; }

 private:
  int theta_dim_;
  int x_dim_;
  std::vector<double> slope_;
  std::vector<double> intercept_;
  std::vector<double> covariance_;  // theta_dim x theta_dim row-major
  std::vector<double> chol_;        // lower Cholesky factor of covariance
  double log_norm_;                 // -0.5 * (d log 2pi + log det cov)
};

/// Wrapper emulating a mis-dispersed candidate: the base family with every
/// conditional standard deviation multiplied by c. c = 1 is the identity.
class DispersionScaled : public PosteriorModel {
 public:
  DispersionScaled(std::shared_ptr<const PosteriorModel> base, double c);

  int theta_dim() const override { return scaled_->theta_dim(); }
  int x_dim() const override { return scaled_->x_dim(); }
  double log_density(std::span<const double> theta,
                     std::span<const double> x) const override;
  std::vector<double> sample(std::span<const double> x,
                             RngStream& rng) const override;
  std::vector<double> sample_densities(std::span<const double> x, std::size_t m,
                                       RngStream& rng) const override {
    return scaled_->sample_densities(x, m, rng);
  }
  std::unique_ptr<PosteriorModel> clone_scaled(double c) const override;
  std::string family() const override { return "dispersion"; }

  double scale() const { return c_; }
  const PosteriorModel& base() const { return *base_; }

 private:
  std::shared_ptr<const PosteriorModel> base_;
  double c_;
  std::unique_ptr<PosteriorModel> scaled_;
};

}  // namespace canvi
