#include "canvi/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace canvi {

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double std_normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
}

namespace {

// Acklam's rational approximation of the normal quantile (~1.15e-9 relative
// error), used as the starting point for one Halley step against erfc.
double acklam_quantile(double p) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double p_low = 0.02425;

  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }
  const double q = std::sqrt(-2.0 * std::log(1.0 - p));
  return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
         ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
}

}  // namespace

double std_normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::domain_error("std_normal_quantile: p must lie in (0, 1)");
  }
  double x = acklam_quantile(p);
  // Halley refinement brings the result to full double precision.
  const double e = std_normal_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

std::size_t conformal_rank(std::size_t n, double alpha) {
  const double raw = static_cast<double>(n + 1) * (1.0 - alpha);
  return static_cast<std::size_t>(std::ceil(raw - 1e-9));
}

double conformal_quantile(std::span<const double> scores, double alpha) {
  if (scores.empty()) {
    throw std::invalid_argument("conformal_quantile: empty score set");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("conformal_quantile: alpha must lie in (0, 1)");
  }
  const std::size_t k = conformal_rank(scores.size(), alpha);
  if (k > scores.size()) return kInfiniteScore;
  std::vector<double> sorted(scores.begin(), scores.end());
  std::nth_element(sorted.begin(), sorted.begin() + (k - 1), sorted.end());
  return sorted[k - 1];
}

double mean(std::span<const double> values) {
  double s = 0.0;
  for (double v : values) s += v;
  return values.empty() ? 0.0 : s / static_cast<double>(values.size());
}

double sample_variance(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double m = mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return ss / static_cast<double>(values.size() - 1);
}

double standard_error(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  return std::sqrt(sample_variance(values) / static_cast<double>(values.size()));
}

}  // namespace canvi
