#pragma once

#include <cstdint>
#include <vector>

#include "smoothsnn/neuron.hpp"
#include "smoothsnn/rng.hpp"
#include "smoothsnn/tensor.hpp"

namespace smoothsnn {

/// How the final layer produces the per-timestep output O_t.
enum class Readout {
  Membrane,  // leaky integrator without fire/reset; O_t is its potential
  Spiking,   // ordinary spiking layer; O_t is its spike vector
};

/// Which derivative of the loss w.r.t. alpha backward_bptt accumulates.
enum class AlphaGradient {
  Truncated,  // sum_t dL/dS(t) * surrogate * (H~(t-1) - U(t)), states held fixed
  Full,       // exact derivative through the smoothing and reset recurrences
};

struct ModelSpec {
  std::vector<std::size_t> layer_sizes;  // input, hidden..., output
  NeuronConfig neuron;
  bool smoothing_enabled = false;
  Readout readout = Readout::Membrane;
  bool normalize = false;
  AlphaGradient alpha_gradient = AlphaGradient::Truncated;
  double beta_init = 0.0;

  void validate() const;

  std::size_t num_weight_layers() const { return layer_sizes.size() - 1; }
  /// True when weight layer `layer` feeds spiking neurons.
  bool is_spiking(std::size_t layer) const {
    return layer + 1 < num_weight_layers() || readout == Readout::Spiking;
  }
  std::size_t num_spiking_layers() const;
  std::size_t input_size() const { return layer_sizes.front(); }
  std::size_t num_classes() const { return layer_sizes.back(); }

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

template <typename Real>
struct ModelParams {
  std::vector<Tensor<Real>> weights;     // per weight layer, fan_out x fan_in
  std::vector<Real> betas;               // per spiking layer when smoothing
  std::vector<Tensor<Real>> norm_scale;  // per spiking layer when normalizing
  std::vector<Tensor<Real>> norm_shift;

  /// Throws ConsistencyError if counts or shapes disagree with `spec`.
  void validate(const ModelSpec& spec) const;

  template <typename Other>
  ModelParams<Other> cast() const {
    ModelParams<Other> out;
    for (const auto& w : weights) out.weights.push_back(w.template cast<Other>());
    for (Real b : betas) out.betas.push_back(static_cast<Other>(b));
    for (const auto& s : norm_scale) out.norm_scale.push_back(s.template cast<Other>());
    for (const auto& s : norm_shift) out.norm_shift.push_back(s.template cast<Other>());
    return out;
  }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Weights uniform in +-sqrt(1/fan_in), betas at spec.beta_init, norm scale
/// 1 and shift 0.
template <typename Real>
ModelParams<Real> init_params(const ModelSpec& spec, RngState& rng);

template <typename Real>
struct NormCache {
  Tensor<Real> normalized;  // (raw - mean) / (std + eps), batch x n
  Tensor<Real> stddev;      // per neuron, [n]
};

/// States of one weight layer over all timesteps.
template <typename Real>
struct LayerTrace {
  Tensor<Real> initial_h;               // H(0), batch x n; H~(0) equals it
  std::vector<LayerState<Real>> steps;  // [t]
  std::vector<NormCache<Real>> norm;    // [t], empty unless normalizing
  Real alpha = Real(0);                 // smoothing coefficient used
};

template <typename Real>
struct ForwardTrace {
  Tensor<Real> input;                  // T x batch x in
  std::vector<LayerTrace<Real>> layers;
  Tensor<Real> logits;                 // T x batch x C

  std::size_t timesteps() const { return input.dim(0); }
  std::size_t batch() const { return input.dim(1); }
};

struct ForwardOptions {
  /// Seed for UniformRandom membrane initialization.
  std::uint64_t init_seed = 0;
};

/// Runs the network over T timesteps and records every state.
template <typename Real>
ForwardTrace<Real> forward_unroll(const ModelSpec& spec,
                                  const ModelParams<Real>& params,
                                  const Tensor<Real>& input_spikes,
                                  const ForwardOptions& options = {});

template <typename Real>
struct Gradients {
  std::vector<Tensor<Real>> weights;
  std::vector<Real> betas;
  std::vector<Tensor<Real>> norm_scale;
  std::vector<Tensor<Real>> norm_shift;
  /// dL/dH_pre per weight layer and timestep ([layer][t]).
  std::vector<std::vector<Tensor<Real>>> membrane;
};

/// Manual backpropagation through time. `grad_logits` has the shape of
/// trace.logits.
template <typename Real>
Gradients<Real> backward_bptt(const ModelSpec& spec,
                              const ModelParams<Real>& params,
                              const ForwardTrace<Real>& trace,
                              const Tensor<Real>& grad_logits);

template <typename Real>
struct SpikingLayerGrad {
  std::vector<Tensor<Real>> h_pre;  // dL/dH_pre(t) == dL/dI(t)
  Real dalpha = Real(0);
};

/// Reverse sweep over one spiking layer. `grad_spikes[t]` is the gradient
/// reaching S(t) from outside the layer; `grad_h_pre_direct`, when given,
/// is injected at H_pre(t) (used to probe temporal sensitivity).
template <typename Real>
SpikingLayerGrad<Real> spiking_layer_backward(
    const LayerTrace<Real>& layer, const std::vector<Tensor<Real>>& grad_spikes,
    const NeuronConfig& cfg, bool smoothing, AlphaGradient mode,
    const std::vector<Tensor<Real>>* grad_h_pre_direct = nullptr);

/// Exact count of S == 1 events, indexed [layer][t].
template <typename Real>
std::vector<std::vector<std::uint64_t>> count_spikes(const ForwardTrace<Real>& trace);

template <typename Real>
std::uint64_t total_spikes(const ForwardTrace<Real>& trace);

}  // namespace smoothsnn
