#pragma once

#include <cstdint>

namespace canvi {

/// Counter-based splittable random stream.
///
/// A stream is identified by (seed, stream_id). The draw sequence is a pure
/// function of that identity, so the same pair reproduces byte-identical
/// sequences across runs and across worker counts. Substreams derived with
/// substream() depend only on the parent identity (not on how many values the
/// parent has produced), which lets callers hand one independent stream to
/// each sample or worker.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  /// Independent child stream; identity derives from this stream's identity
  /// and child_id, never from the current draw position.
  RngStream substream(std::uint64_t child_id) const;

  std::uint64_t next_u64();

  /// Uniform on [0, 1).
  double uniform01();
  /// Uniform on (0, 1), never exactly 0 or 1 (safe for inverse-CDF sampling).
  double uniform_open01();
  double uniform(double lo, double hi);

  double normal();
  double normal(double mean, double stddev);
  /// Log-space parameterization: log of the draw is N(mu, sigma^2).
  double lognormal(double mu, double sigma);
  int bernoulli(double p);
  long binomial(long n, double p);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

 private:
  RngStream() = default;

  std::uint64_t seed_ = 0;
  std::uint64_t stream_id_ = 0;
  std::uint64_t identity_ = 0;  // mixed key; substream derivation base
  std::uint64_t state_ = 0;     // advances with each draw
};

}  // namespace canvi
