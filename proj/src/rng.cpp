#include "smoothsnn/rng.hpp"

#include "smoothsnn/errors.hpp"

namespace smoothsnn {

namespace {
constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

RngState::RngState(std::uint64_t seed) : seed_(seed), key_(mix64(seed)) {}

std::uint64_t RngState::next_u64() {
  ++counter_;
  return mix64(key_ + counter_ * kGamma);
}

double RngState::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

float RngState::uniform_float() {
  return static_cast<float>(next_u64() >> 40) * 0x1.0p-24f;
}

std::uint64_t RngState::below(std::uint64_t n) {
  if (n == 0) throw ParameterError("RngState::below requires n > 0");
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

RngState RngState::split(std::uint64_t stream_id) const {
  const std::uint64_t key = mix64(key_ ^ mix64(stream_id + kGamma));
  return RngState(seed_, key, 0);
}

template <typename Real>
Tensor<Real> rng_uniform(RngState& state, const Shape& shape) {
  Tensor<Real> out(shape);
  for (auto& v : out.data()) {
    if constexpr (sizeof(Real) == sizeof(float)) {
      v = state.uniform_float();
    } else {
      v = static_cast<Real>(state.uniform());
    }
  }
  return out;
}

template Tensor<float> rng_uniform(RngState&, const Shape&);
template Tensor<double> rng_uniform(RngState&, const Shape&);

}  // namespace smoothsnn
