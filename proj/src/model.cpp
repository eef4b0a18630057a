#include "canvi/model.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace canvi {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Lower Cholesky factor of an SPD matrix (row-major, dim x dim).
std::vector<double> cholesky(const std::vector<double>& a, int dim) {
  std::vector<double> l(dim * dim, 0.0);
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = a[i * dim + j];
      for (int k = 0; k < j; ++k) s -= l[i * dim + k] * l[j * dim + k];
      if (i == j) {
        if (!(s > 0.0)) {
          throw std::invalid_argument("covariance is not positive definite");
        }
        l[i * dim + i] = std::sqrt(s);
      } else {
        l[i * dim + j] = s / l[j * dim + j];
      }
    }
  }
  return l;
}
}  // namespace

// ---------------------------------------------------------------------------
// SupportTransform

SupportTransform SupportTransform::identity(int dim) {
  SupportTransform t;
  t.kinds_.assign(dim, Kind::identity);
  t.intervals_.assign(dim, Interval{kNegInf, -kNegInf});
  return t;
}

SupportTransform SupportTransform::for_support(const std::vector<Interval>& support) {
  SupportTransform t;
  t.intervals_ = support;
  t.kinds_.reserve(support.size());
  for (const auto& iv : support) {
    if (iv.bounded()) {
      t.kinds_.push_back(Kind::logit);
    } else if (iv.lo == 0.0 && !std::isfinite(iv.hi)) {
      t.kinds_.push_back(Kind::log);
    } else {
      t.kinds_.push_back(Kind::identity);
    }
  }
  return t;
}

SupportTransform SupportTransform::from_parts(std::vector<Kind> kinds,
                                              std::vector<Interval> intervals) {
  if (kinds.size() != intervals.size()) {
    throw std::invalid_argument("SupportTransform: kinds/intervals size mismatch");
  }
  SupportTransform t;
  t.kinds_ = std::move(kinds);
  t.intervals_ = std::move(intervals);
  return t;
}

bool SupportTransform::to_unconstrained(std::span<const double> theta,
                                        std::span<double> u) const {
  for (int d = 0; d < dim(); ++d) {
    switch (kinds_[d]) {
      case Kind::identity:
        u[d] = theta[d];
        break;
      case Kind::logit: {
        const auto& iv = intervals_[d];
        const double z = (theta[d] - iv.lo) / (iv.hi - iv.lo);
        if (!(z > 0.0 && z < 1.0)) return false;
        u[d] = std::log(z / (1.0 - z));
        break;
      }
      case Kind::log:
        if (!(theta[d] > 0.0)) return false;
        u[d] = std::log(theta[d]);
        break;
    }
  }
  return true;
}

void SupportTransform::to_constrained(std::span<const double> u,
                                      std::span<double> theta) const {
  for (int d = 0; d < dim(); ++d) {
    switch (kinds_[d]) {
      case Kind::identity:
        theta[d] = u[d];
        break;
      case Kind::logit: {
        const auto& iv = intervals_[d];
        const double z = 1.0 / (1.0 + std::exp(-u[d]));
        theta[d] = iv.lo + (iv.hi - iv.lo) * z;
        break;
      }
      case Kind::log:
        theta[d] = std::exp(u[d]);
        break;
    }
  }
}

double SupportTransform::log_jacobian(std::span<const double> theta) const {
  double lj = 0.0;
  for (int d = 0; d < dim(); ++d) {
    switch (kinds_[d]) {
      case Kind::identity:
        break;
      case Kind::logit: {
        const auto& iv = intervals_[d];
        const double z = (theta[d] - iv.lo) / (iv.hi - iv.lo);
        lj += -std::log(z) - std::log(1.0 - z) - std::log(iv.hi - iv.lo);
        break;
      }
      case Kind::log:
        lj += -std::log(theta[d]);
        break;
    }
  }
  return lj;
}

double SupportTransform::log_jacobian_from_u(std::span<const double> u) const {
  auto softplus = [](double v) {
    return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
  };
  double lj = 0.0;
  for (int d = 0; d < dim(); ++d) {
    switch (kinds_[d]) {
      case Kind::identity:
        break;
      case Kind::logit:
        // -log z - log(1-z) with z = sigmoid(u)
        lj += softplus(u[d]) + softplus(-u[d]) -
              std::log(intervals_[d].hi - intervals_[d].lo);
        break;
      case Kind::log:
        lj += -u[d];
        break;
    }
  }
  return lj;
}

bool SupportTransform::is_identity() const {
  for (auto k : kinds_) {
    if (k != Kind::identity) return false;
  }
  return true;
}

std::vector<double> PosteriorModel::sample_densities(std::span<const double> x,
                                                     std::size_t m,
                                                     RngStream& rng) const {
  std::vector<double> out(m);
  for (std::size_t j = 0; j < m; ++j) {
    const auto theta = sample(x, rng);
    out[j] = std::exp(log_density(theta, x));
  }
  return out;
}

// ---------------------------------------------------------------------------
// ConditionalLinearGaussian

ConditionalLinearGaussian::ConditionalLinearGaussian(int theta_dim, int x_dim,
                                                     std::vector<double> slope,
                                                     std::vector<double> intercept,
                                                     std::vector<double> covariance)
    : theta_dim_(theta_dim),
      x_dim_(x_dim),
      slope_(std::move(slope)),
      intercept_(std::move(intercept)),
      covariance_(std::move(covariance)) {
  if (static_cast<int>(slope_.size()) != theta_dim * x_dim ||
      static_cast<int>(intercept_.size()) != theta_dim ||
      static_cast<int>(covariance_.size()) != theta_dim * theta_dim) {
    throw std::invalid_argument("ConditionalLinearGaussian: shape mismatch");
  }
  chol_ = cholesky(covariance_, theta_dim_);
  double log_det = 0.0;
  for (int i = 0; i < theta_dim_; ++i) log_det += 2.0 * std::log(chol_[i * theta_dim_ + i]);
  log_norm_ = -0.5 * (theta_dim_ * std::log(2.0 * M_PI) + log_det);
}

ConditionalLinearGaussian ConditionalLinearGaussian::scalar(double phi,
                                                            double variance) {
  return ConditionalLinearGaussian(1, 1, {phi}, {0.0}, {variance});
}

double ConditionalLinearGaussian::log_density(std::span<const double> theta,
                                              std::span<const double> x) const {
  if (static_cast<int>(theta.size()) != theta_dim_ ||
      static_cast<int>(x.size()) != x_dim_) {
    throw std::invalid_argument("log_density: dimension mismatch");
  }
  // r = theta - (slope x + intercept); then solve L v = r and take |v|^2.
  std::vector<double> r(theta_dim_);
  for (int i = 0; i < theta_dim_; ++i) {
    double m = intercept_[i];
    for (int j = 0; j < x_dim_; ++j) m += slope_[i * x_dim_ + j] * x[j];
    r[i] = theta[i] - m;
  }
  double quad = 0.0;
  for (int i = 0; i < theta_dim_; ++i) {
    double v = r[i];
    for (int k = 0; k < i; ++k) v -= chol_[i * theta_dim_ + k] * r[k];
    v /= chol_[i * theta_dim_ + i];
    r[i] = v;
    quad += v * v;
  }
  return log_norm_ - 0.5 * quad;
}

std::vector<double> ConditionalLinearGaussian::sample(std::span<const double> x,
                                                      RngStream& rng) const {
  std::vector<double> out(theta_dim_);
  std::vector<double> z(theta_dim_);
  for (double& v : z) v = rng.normal();
  for (int i = 0; i < theta_dim_; ++i) {
    double m = intercept_[i];
    for (int j = 0; j < x_dim_; ++j) m += slope_[i * x_dim_ + j] * x[j];
    for (int k = 0; k <= i; ++k) m += chol_[i * theta_dim_ + k] * z[k];
    out[i] = m;
  }
  return out;
}

std::vector<double> ConditionalLinearGaussian::sample_densities(
    std::span<const double> x, std::size_t m, RngStream& rng) const {
  if (static_cast<int>(x.size()) != x_dim_) {
    throw std::invalid_argument("sample_densities: dimension mismatch");
  }
  // The density at a draw depends only on its whitened radius.
  std::vector<double> out(m);
  for (std::size_t j = 0; j < m; ++j) {
    double quad = 0.0;
    for (int d = 0; d < theta_dim_; ++d) {
      const double z = rng.normal();
      quad += z * z;
    }
    out[j] = std::exp(log_norm_ - 0.5 * quad);
  }
  return out;
}

std::unique_ptr<PosteriorModel> ConditionalLinearGaussian::clone_scaled(double c) const {
  if (!(c > 0.0)) throw std::invalid_argument("clone_scaled: c must be positive");
  std::vector<double> cov = covariance_;
  for (double& v : cov) v *= c * c;
  return std::make_unique<ConditionalLinearGaussian>(theta_dim_, x_dim_, slope_,
                                                     intercept_, std::move(cov));
}

// ---------------------------------------------------------------------------
// DispersionScaled

DispersionScaled::DispersionScaled(std::shared_ptr<const PosteriorModel> base,
                                   double c)
    : base_(std::move(base)), c_(c) {
  if (!base_) throw std::invalid_argument("DispersionScaled: null base model");
  if (!(c > 0.0)) throw std::invalid_argument("DispersionScaled: c must be positive");
  scaled_ = base_->clone_scaled(c_);
}

double DispersionScaled::log_density(std::span<const double> theta,
                                     std::span<const double> x) const {
  return scaled_->log_density(theta, x);
}

std::vector<double> DispersionScaled::sample(std::span<const double> x,
                                             RngStream& rng) const {
  return scaled_->sample(x, rng);
}

std::unique_ptr<PosteriorModel> DispersionScaled::clone_scaled(double c) const {
  return std::make_unique<DispersionScaled>(base_, c_ * c);
}

}  // namespace canvi
