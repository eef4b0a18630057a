#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace canvi {

/// Conformity scores are non-negative reals extended with +inf; IEEE doubles
/// give the required total order (+inf strictly above every finite value) as
/// long as NaN never enters, which the producing operations guarantee.
inline constexpr double kInfiniteScore = std::numeric_limits<double>::infinity();

/// Standard normal CDF.
double std_normal_cdf(double z);

/// Standard normal density.
double std_normal_pdf(double z);

/// Standard normal quantile; throws std::domain_error outside (0, 1).
double std_normal_quantile(double p);

/// Split-conformal quantile: the k-th smallest score with
/// k = ceil((N + 1) * (1 - alpha)); returns +inf when k > N (the calibration
/// set is too small for the requested level, so the region is the full
/// domain). Throws std::invalid_argument on empty input or alpha outside
/// (0, 1).
double conformal_quantile(std::span<const double> scores, double alpha);

/// ceil((n + 1) * (1 - alpha)), 1-based; snaps values within 1e-9 of an
/// integer before taking the ceiling so exact levels like 19/20 don't round
/// up through floating-point noise.
std::size_t conformal_rank(std::size_t n, double alpha);

double mean(std::span<const double> values);
double sample_variance(std::span<const double> values);
/// Standard error of the mean.
double standard_error(std::span<const double> values);

}  // namespace canvi
