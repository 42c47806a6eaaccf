#pragma once

#include "smoothsnn/tensor.hpp"

namespace smoothsnn {

/// How a neuron's membrane potential starts at t = 0.
struct MpInit {
  enum class Kind { Zero, UniformRandom };
  Kind kind = Kind::Zero;
  double low = 0.0;   // UniformRandom only
  double high = 1.0;  // UniformRandom only; defaults to the threshold

  static MpInit zero() { return {}; }
  static MpInit uniform(double low, double high) {
    return {Kind::UniformRandom, low, high};
  }
  friend bool operator==(const MpInit&, const MpInit&) = default;
};

/// Forward spike nonlinearity. Heaviside is the real neuron. ClippedLinear
/// is clamp((h - threshold)/a + 1/2, 0, 1), whose derivative is exactly the
/// rectangular surrogate; it exists so backward passes can be checked
/// against finite differences.
enum class SpikeFunction { Heaviside, ClippedLinear };

struct NeuronConfig {
  double tau = 2.0;
  double threshold = 1.0;
  double surrogate_width = 1.0;
  MpInit mp_init;
  SpikeFunction spike_fn = SpikeFunction::Heaviside;

  /// Membrane decay factor 1 - 1/tau.
  double decay() const { return 1.0 - 1.0 / tau; }
  /// Throws ParameterError unless tau > 1, threshold > 0, width > 0.
  void validate() const;

  friend bool operator==(const NeuronConfig&, const NeuronConfig&) = default;
};

/// One layer's state after a single timestep. Every tensor is batch x neurons.
template <typename Real>
struct LayerState {
  Tensor<Real> h;         // membrane potential after reset
  Tensor<Real> h_smooth;  // smoothed potential (equal to h_pre for vanilla LIF)
  Tensor<Real> u;         // leaked potential (1 - 1/tau) * h(t-1)
  Tensor<Real> current;   // input current I
  Tensor<Real> h_pre;     // charged potential before the threshold test
  Tensor<Real> spikes;    // S in {0,1} (in [0,1] for ClippedLinear)
};

inline constexpr double kAlphaMin = 1e-6;
inline constexpr double kAlphaMax = 1.0 - 1e-6;

/// Smoothing coefficient alpha = sigmoid(beta), clamped to [1e-6, 1 - 1e-6].
double alpha_from_beta(double beta);
/// d alpha / d beta; zero where the clamp is active.
double dalpha_dbeta(double beta);

/// Vanilla LIF: charge, fire, soft reset.
template <typename Real>
LayerState<Real> lif_step(const Tensor<Real>& prev_h, const Tensor<Real>& input,
                          const NeuronConfig& cfg);

/// LIF with membrane potential smoothing: leak, smooth against the previous
/// smoothed potential, charge, fire, soft reset.
template <typename Real>
LayerState<Real> smoothed_lif_step(const Tensor<Real>& prev_h,
                                   const Tensor<Real>& prev_h_smooth,
                                   const Tensor<Real>& input,
                                   const NeuronConfig& cfg, Real alpha);

/// Rectangular surrogate (1/a) * 1[|h - threshold| < a/2].
template <typename Real>
Tensor<Real> surrogate_grad(const Tensor<Real>& h_pre, const NeuronConfig& cfg);

template <typename Real>
Real surrogate_grad_scalar(Real h_pre, const NeuronConfig& cfg) {
  const Real half = Real(cfg.surrogate_width / 2.0);
  const Real diff = h_pre - Real(cfg.threshold);
  return (diff < half && -diff < half) ? Real(1.0 / cfg.surrogate_width)
                                       : Real(0);
}

template <typename Real>
Real spike_scalar(Real h_pre, const NeuronConfig& cfg) {
  if (cfg.spike_fn == SpikeFunction::Heaviside) {
    return h_pre >= Real(cfg.threshold) ? Real(1) : Real(0);
  }
  const Real x = (h_pre - Real(cfg.threshold)) / Real(cfg.surrogate_width) +
                 Real(0.5);
  return x <= Real(0) ? Real(0) : (x >= Real(1) ? Real(1) : x);
}

/// Local derivative of a spike with respect to alpha, holding the previous
/// smoothed potential and the leaked potential fixed:
/// surrogate(h_pre) * (prev_h_smooth - u).
template <typename Real>
Tensor<Real> dspike_dalpha_local(const Tensor<Real>& h_pre,
                                 const Tensor<Real>& prev_h_smooth,
                                 const Tensor<Real>& u, const NeuronConfig& cfg);

}  // namespace smoothsnn
