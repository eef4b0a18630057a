#include "canvi/rng.hpp"

#include <cmath>
#include <stdexcept>

#include "canvi/stats.hpp"

namespace canvi {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ull;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBull;
  z ^= z >> 31;
  return z;
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id) {
  const std::uint64_t key = mix64(seed ^ 0xA3EC647659359ACDull);
  identity_ = mix64(key + kGolden * (stream_id + 1));
  state_ = identity_;
}

RngStream RngStream::substream(std::uint64_t child_id) const {
  RngStream child;
  child.seed_ = seed_;
  child.stream_id_ = stream_id_;
  child.identity_ = mix64(identity_ + kGolden * (child_id + 1));
  child.state_ = child.identity_;
  return child;
}

std::uint64_t RngStream::next_u64() {
  std::uint64_t z = (state_ += kGolden);
  return mix64(z);
}

double RngStream::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform_open01() {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) {
  if (!(lo <= hi)) throw std::domain_error("uniform: lo must not exceed hi");
  return lo + (hi - lo) * uniform01();
}

double RngStream::normal() { return std_normal_quantile(uniform_open01()); }

double RngStream::normal(double mean, double stddev) {
  if (!(stddev > 0.0)) throw std::domain_error("normal: stddev must be positive");
  return mean + stddev * normal();
}

double RngStream::lognormal(double mu, double sigma) {
  if (!(sigma > 0.0)) throw std::domain_error("lognormal: sigma must be positive");
  return std::exp(mu + sigma * normal());
}

int RngStream::bernoulli(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error("bernoulli: p outside [0, 1]");
  return uniform01() < p ? 1 : 0;
}

long RngStream::binomial(long n, double p) {
  if (n < 0) throw std::domain_error("binomial: n must be nonnegative");
  if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error("binomial: p outside [0, 1]");
  if (n == 0 || p == 0.0) return 0;
  if (p == 1.0) return n;
  if (p > 0.5) return n - binomial(n, 1.0 - p);

  // CDF inversion; pmf(0) stays normal while -n*log1p(-p) < ~700, otherwise
  // split the draw to keep the recurrence in range.
  if (-static_cast<double>(n) * std::log1p(-p) > 700.0) {
    const long half = n / 2;
    return binomial(half, p) + binomial(n - half, p);
  }
  const double u = uniform01();
  const double odds = p / (1.0 - p);
  double pmf = std::pow(1.0 - p, static_cast<double>(n));
  double cdf = pmf;
  long k = 0;
  while (u > cdf && k < n) {
    ++k;
    pmf *= odds * static_cast<double>(n - k + 1) / static_cast<double>(k);
    cdf += pmf;
  }
  return k;
}

}  // namespace canvi
