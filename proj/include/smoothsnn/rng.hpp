#pragma once

#include <cstdint>

#include "smoothsnn/tensor.hpp"

namespace smoothsnn {

/// Counter-based generator: output n is a SplitMix64 finalizer applied to
/// key + n * golden_gamma. The state is just (key, counter), so it copies
/// freely and independent streams are derived with split().
class RngState {
 public:
  explicit RngState(std::uint64_t seed = 0);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t counter() const noexcept { return counter_; }

  std::uint64_t next_u64();
  /// Uniform in [0,1) with 53 random bits.
  double uniform();
  /// Uniform in [0,1) with 24 random bits; exact in float.
  float uniform_float();
  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);

  /// Independent stream keyed by (this seed, stream_id). Does not advance
  /// this generator.
  RngState split(std::uint64_t stream_id) const;

  friend bool operator==(const RngState&, const RngState&) = default;

 private:
  RngState(std::uint64_t seed, std::uint64_t key, std::uint64_t counter)
      : seed_(seed), key_(key), counter_(counter) {}

  std::uint64_t seed_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t x);

/// Tensor of uniform [0,1) draws; values use the resolution of `Real`.
template <typename Real>
Tensor<Real> rng_uniform(RngState& state, const Shape& shape);

}  // namespace smoothsnn
