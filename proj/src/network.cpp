#include "smoothsnn/network.hpp"

#include <cmath>
#include <string>

#include "smoothsnn/errors.hpp"

namespace smoothsnn {

namespace {
constexpr double kNormEps = 1e-5;
}

void ModelSpec::validate() const {
  if (layer_sizes.size() < 2) {
    throw ParameterError("model needs at least 2 layer sizes (input, output)");
  }
  for (std::size_t s : layer_sizes) {
    if (s < 1) throw ParameterError("layer sizes must be >= 1");
  }
  neuron.validate();
}

std::size_t ModelSpec::num_spiking_layers() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < num_weight_layers(); ++l) n += is_spiking(l);
  return n;
}

template <typename Real>
void ModelParams<Real>::validate(const ModelSpec& spec) const {
  const std::size_t layers = spec.num_weight_layers();
  if (weights.size() != layers) {
    throw ConsistencyError("expected " + std::to_string(layers) +
                           " weight matrices, got " +
                           std::to_string(weights.size()));
  }
  for (std::size_t l = 0; l < layers; ++l) {
    const Shape want{spec.layer_sizes[l + 1], spec.layer_sizes[l]};
    if (weights[l].shape() != want) {
      throw ConsistencyError("weight " + std::to_string(l) + " has shape " +
                             shape_to_string(weights[l].shape()) + ", expected " +
                             shape_to_string(want));
    }
  }
  const std::size_t spiking = spec.num_spiking_layers();
  const std::size_t want_betas = spec.smoothing_enabled ? spiking : 0;
  if (betas.size() != want_betas) {
    throw ConsistencyError("expected " + std::to_string(want_betas) +
                           " smoothing parameters, got " +
                           std::to_string(betas.size()));
  }
  const std::size_t want_norm = spec.normalize ? spiking : 0;
  if (norm_scale.size() != want_norm || norm_shift.size() != want_norm) {
    throw ConsistencyError("normalization parameter count mismatch");
  }
  for (std::size_t l = 0; l < want_norm; ++l) {
    const Shape want{spec.layer_sizes[l + 1]};
    if (norm_scale[l].shape() != want || norm_shift[l].shape() != want) {
      throw ConsistencyError("normalization parameter " + std::to_string(l) +
                             " has wrong shape");
    }
  }
}

template <typename Real>
ModelParams<Real> init_params(const ModelSpec& spec, RngState& rng) {
  spec.validate();
  ModelParams<Real> p;
  for (std::size_t l = 0; l < spec.num_weight_layers(); ++l) {
    const std::size_t fan_in = spec.layer_sizes[l];
    const std::size_t fan_out = spec.layer_sizes[l + 1];
    const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
    Tensor<Real> w({fan_out, fan_in});
    for (auto& v : w.data()) v = Real((2.0 * rng.uniform() - 1.0) * bound);
    p.weights.push_back(std::move(w));
  }
  const std::size_t spiking = spec.num_spiking_layers();
  if (spec.smoothing_enabled) p.betas.assign(spiking, Real(spec.beta_init));
  if (spec.normalize) {
    for (std::size_t l = 0; l < spiking; ++l) {
      p.norm_scale.emplace_back(Shape{spec.layer_sizes[l + 1]}, Real(1));
      p.norm_shift.emplace_back(Shape{spec.layer_sizes[l + 1]}, Real(0));
    }
  }
  return p;
}

namespace {

// Per-neuron standardization over the batch, then affine scale/shift.
template <typename Real>
Tensor<Real> normalize_forward(const Tensor<Real>& raw, const Tensor<Real>& scale,
                               const Tensor<Real>& shift, NormCache<Real>& cache) {
  const std::size_t batch = raw.dim(0), n = raw.dim(1);
  cache.normalized = Tensor<Real>(raw.shape());
  cache.stddev = Tensor<Real>({n});
  Tensor<Real> out(raw.shape());
  for (std::size_t j = 0; j < n; ++j) {
    Real mean = 0;
    for (std::size_t b = 0; b < batch; ++b) mean += raw.at(b, j);
    mean /= Real(batch);
    Real var = 0;
    for (std::size_t b = 0; b < batch; ++b) {
      const Real d = raw.at(b, j) - mean;
      var += d * d;
    }
    var /= Real(batch);
    const Real sd = std::sqrt(var);
    cache.stddev[j] = sd;
    const Real denom = sd + Real(kNormEps);
    for (std::size_t b = 0; b < batch; ++b) {
      const Real xhat = (raw.at(b, j) - mean) / denom;
      cache.normalized.at(b, j) = xhat;
      out.at(b, j) = scale[j] * xhat + shift[j];
    }
  }
  return out;
}

template <typename Real>
Tensor<Real> normalize_backward(const Tensor<Real>& grad_out,
                                const Tensor<Real>& scale,
                                const NormCache<Real>& cache,
                                Tensor<Real>& grad_scale,
                                Tensor<Real>& grad_shift) {
  const std::size_t batch = grad_out.dim(0), n = grad_out.dim(1);
  Tensor<Real> grad_raw(grad_out.shape());
  for (std::size_t j = 0; j < n; ++j) {
    Real sum_g = 0, sum_gx = 0;
    for (std::size_t b = 0; b < batch; ++b) {
      const Real g = grad_out.at(b, j);
      const Real xhat = cache.normalized.at(b, j);
      grad_scale[j] += g * xhat;
      grad_shift[j] += g;
      sum_g += g * scale[j];
      sum_gx += g * scale[j] * xhat;
    }
    const Real sd = cache.stddev[j];
    const Real denom = sd + Real(kNormEps);
    const Real mean_g = sum_g / Real(batch);
    // The std term contributes only when the batch actually varies.
    const Real coef = sd > Real(0) ? sum_gx * denom / (Real(batch) * sd) : Real(0);
    for (std::size_t b = 0; b < batch; ++b) {
      const Real g = grad_out.at(b, j) * scale[j];
      grad_raw.at(b, j) = (g - mean_g - cache.normalized.at(b, j) * coef) / denom;
    }
  }
  return grad_raw;
}

template <typename Real>
LayerState<Real> readout_step(const Tensor<Real>& prev_h, const Tensor<Real>& input,
                              const NeuronConfig& cfg) {
  const Real decay = Real(1) - Real(1) / Real(cfg.tau);
  LayerState<Real> s;
  s.current = input;
  s.u = Tensor<Real>(prev_h.shape());
  s.h_pre = Tensor<Real>(prev_h.shape());
  for (std::size_t i = 0; i < prev_h.size(); ++i) {
    s.u[i] = decay * prev_h[i];
    s.h_pre[i] = s.u[i] + input[i];
  }
  s.h = s.h_pre;
  s.h_smooth = s.h_pre;
  s.spikes = Tensor<Real>(prev_h.shape());
  return s;
}

template <typename Real>
Tensor<Real> initial_potential(const ModelSpec& spec, std::size_t layer,
                               std::size_t batch, const ForwardOptions& options) {
  const std::size_t n = spec.layer_sizes[layer + 1];
  Tensor<Real> h({batch, n});
  const MpInit& init = spec.neuron.mp_init;
  if (spec.is_spiking(layer) && init.kind == MpInit::Kind::UniformRandom) {
    RngState rng = RngState(options.init_seed).split(layer);
    for (auto& v : h.data()) {
      v = Real(init.low + (init.high - init.low) * rng.uniform());
    }
  }
  return h;
}

}  // namespace

template <typename Real>
ForwardTrace<Real> forward_unroll(const ModelSpec& spec,
                                  const ModelParams<Real>& params,
                                  const Tensor<Real>& input_spikes,
                                  const ForwardOptions& options) {
  spec.validate();
  params.validate(spec);
  if (input_spikes.rank() != 3 || input_spikes.dim(2) != spec.input_size()) {
    throw DimensionError("forward_unroll: input must be [T x batch x " +
                         std::to_string(spec.input_size()) + "], got " +
                         shape_to_string(input_spikes.shape()));
  }
  if (!all_finite(input_spikes)) {
    throw DataError("forward_unroll: input contains non-finite values");
  }
  const std::size_t T = input_spikes.dim(0);
  const std::size_t batch = input_spikes.dim(1);
  const std::size_t layers = spec.num_weight_layers();

  ForwardTrace<Real> trace;
  trace.input = input_spikes;
  trace.layers.resize(layers);
  std::vector<Tensor<Real>> weights_t;
  std::size_t spiking_index = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    weights_t.push_back(transpose(params.weights[l]));
    auto& lt = trace.layers[l];
    lt.initial_h = initial_potential<Real>(spec, l, batch, options);
    lt.steps.reserve(T);
    if (spec.is_spiking(l)) {
      if (spec.smoothing_enabled) {
        lt.alpha = Real(alpha_from_beta(static_cast<double>(params.betas[spiking_index])));
      }
      ++spiking_index;
    }
  }

  trace.logits = Tensor<Real>({T, batch, spec.num_classes()});
  for (std::size_t t = 0; t < T; ++t) {
    Tensor<Real> x = input_spikes.slice(t);
    for (std::size_t l = 0; l < layers; ++l) {
      auto& lt = trace.layers[l];
      const Tensor<Real>& prev_h = t ? lt.steps[t - 1].h : lt.initial_h;
      const Tensor<Real>& prev_hs = t ? lt.steps[t - 1].h_smooth : lt.initial_h;
      Tensor<Real> current = matmul(x, weights_t[l]);
      if (spec.is_spiking(l)) {
        if (spec.normalize) {
          NormCache<Real> cache;
          current = normalize_forward(current, params.norm_scale[l],
                                      params.norm_shift[l], cache);
          lt.norm.push_back(std::move(cache));
        }
        if (spec.smoothing_enabled) {
          lt.steps.push_back(smoothed_lif_step(prev_h, prev_hs, current,
                                               spec.neuron, lt.alpha));
        } else {
          lt.steps.push_back(lif_step(prev_h, current, spec.neuron));
        }
        x = lt.steps.back().spikes;
      } else {
        lt.steps.push_back(readout_step(prev_h, current, spec.neuron));
        x = lt.steps.back().h_pre;
      }
    }
    trace.logits.set_slice(t, x);
  }
  return trace;
}

template <typename Real>
SpikingLayerGrad<Real> spiking_layer_backward(
    const LayerTrace<Real>& layer, const std::vector<Tensor<Real>>& grad_spikes,
    const NeuronConfig& cfg, bool smoothing, AlphaGradient mode,
    const std::vector<Tensor<Real>>* grad_h_pre_direct) {
  const std::size_t T = layer.steps.size();
  if (grad_spikes.size() != T ||
      (grad_h_pre_direct && grad_h_pre_direct->size() != T)) {
    throw ConsistencyError("spiking_layer_backward: gradient count != timesteps");
  }
  const Real decay = Real(1) - Real(1) / Real(cfg.tau);
  const Real threshold = Real(cfg.threshold);
  const Real alpha = layer.alpha;
  const Shape& shape = layer.initial_h.shape();
  const std::size_t n = layer.initial_h.size();

  SpikingLayerGrad<Real> out;
  out.h_pre.assign(T, Tensor<Real>(shape));
  Tensor<Real> grad_h(shape);       // dL/dH(t) arriving from t+1
  Tensor<Real> grad_smooth(shape);  // dL/dH~(t) arriving from t+1
  Real dalpha = 0;

  for (std::size_t step = T; step-- > 0;) {
    const LayerState<Real>& s = layer.steps[step];
    const Tensor<Real>& prev_hs = step ? layer.steps[step - 1].h_smooth : layer.initial_h;
    require_same_shape(grad_spikes[step], s.spikes, "spiking_layer_backward");
    Tensor<Real>& g_pre = out.h_pre[step];
    for (std::size_t i = 0; i < n; ++i) {
      const Real sg = surrogate_grad_scalar(s.h_pre[i], cfg);
      // Spikes feed the next layer and the soft reset H = H_pre - S * threshold.
      const Real g_spike = grad_spikes[step][i] - threshold * grad_h[i];
      Real gp = grad_h[i] + g_spike * sg;
      if (grad_h_pre_direct) gp += (*grad_h_pre_direct)[step][i];
      g_pre[i] = gp;
      Real g_u;
      if (smoothing) {
        const Real g_hs = gp + grad_smooth[i];
        const Real diff = prev_hs[i] - s.u[i];
        dalpha += (mode == AlphaGradient::Full ? g_hs : g_spike * sg) * diff;
        g_u = (Real(1) - alpha) * g_hs;
        grad_smooth[i] = alpha * g_hs;
      } else {
        g_u = gp;
      }
      grad_h[i] = decay * g_u;
    }
  }
  out.dalpha = dalpha;
  return out;
}

namespace {

template <typename Real>
std::vector<Tensor<Real>> readout_backward(const LayerTrace<Real>& layer,
                                           const Tensor<Real>& grad_logits,
                                           const NeuronConfig& cfg) {
  const std::size_t T = layer.steps.size();
  const Real decay = Real(1) - Real(1) / Real(cfg.tau);
  std::vector<Tensor<Real>> grads(T);
  Tensor<Real> carry(layer.initial_h.shape());
  for (std::size_t step = T; step-- > 0;) {
    Tensor<Real> g = grad_logits.slice(step);
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] += carry[i];
      carry[i] = decay * g[i];
    }
    grads[step] = std::move(g);
  }
  return grads;
}

}  // namespace

template <typename Real>
Gradients<Real> backward_bptt(const ModelSpec& spec,
                              const ModelParams<Real>& params,
                              const ForwardTrace<Real>& trace,
                              const Tensor<Real>& grad_logits) {
  params.validate(spec);
  const std::size_t layers = spec.num_weight_layers();
  if (trace.layers.size() != layers) {
    throw ConsistencyError("backward_bptt: trace has " +
                           std::to_string(trace.layers.size()) +
                           " layers, spec has " + std::to_string(layers));
  }
  if (grad_logits.shape() != trace.logits.shape()) {
    throw ConsistencyError("backward_bptt: grad_logits shape " +
                           shape_to_string(grad_logits.shape()) +
                           " != logits shape " +
                           shape_to_string(trace.logits.shape()));
  }
  const std::size_t T = trace.timesteps();
  for (std::size_t l = 0; l < layers; ++l) {
    const auto& lt = trace.layers[l];
    if (lt.steps.size() != T ||
        lt.initial_h.shape() != Shape{trace.batch(), spec.layer_sizes[l + 1]} ||
        (spec.normalize && spec.is_spiking(l) && lt.norm.size() != T)) {
      throw ConsistencyError("backward_bptt: trace layer " + std::to_string(l) +
                             " does not match the model");
    }
  }

  Gradients<Real> grads;
  grads.weights.resize(layers);
  grads.membrane.resize(layers);
  const std::size_t spiking = spec.num_spiking_layers();
  if (spec.smoothing_enabled) grads.betas.assign(spiking, Real(0));
  if (spec.normalize) {
    for (std::size_t l = 0; l < spiking; ++l) {
      grads.norm_scale.emplace_back(Shape{spec.layer_sizes[l + 1]});
      grads.norm_shift.emplace_back(Shape{spec.layer_sizes[l + 1]});
    }
  }

  // Gradient arriving at the outputs of the current layer, per timestep.
  std::vector<Tensor<Real>> grad_out(T);
  for (std::size_t t = 0; t < T; ++t) grad_out[t] = grad_logits.slice(t);

  for (std::size_t l = layers; l-- > 0;) {
    const auto& lt = trace.layers[l];
    std::vector<Tensor<Real>> grad_current;
    if (spec.is_spiking(l)) {
      auto sg = spiking_layer_backward(lt, grad_out, spec.neuron,
                                       spec.smoothing_enabled, spec.alpha_gradient);
      grad_current = std::move(sg.h_pre);
      if (spec.smoothing_enabled) {
        grads.betas[l] = sg.dalpha * Real(dalpha_dbeta(static_cast<double>(params.betas[l])));
      }
    } else {
      grad_current = readout_backward(lt, grad_logits, spec.neuron);
    }
    grads.membrane[l] = grad_current;

    Tensor<Real> dw({spec.layer_sizes[l + 1], spec.layer_sizes[l]});
    std::vector<Tensor<Real>> grad_below(l ? T : 0);
    for (std::size_t t = 0; t < T; ++t) {
      Tensor<Real> g_raw = grad_current[t];
      if (spec.normalize && spec.is_spiking(l)) {
        g_raw = normalize_backward(g_raw, params.norm_scale[l], lt.norm[t],
                                   grads.norm_scale[l], grads.norm_shift[l]);
      }
      const Tensor<Real> x_in = l ? trace.layers[l - 1].steps[t].spikes
                                  : trace.input.slice(t);
      axpy(dw, Real(1), matmul(transpose(g_raw), x_in));
      if (l) grad_below[t] = matmul(g_raw, params.weights[l]);
    }
    grads.weights[l] = std::move(dw);
    grad_out = std::move(grad_below);
  }
  return grads;
}

template <typename Real>
std::vector<std::vector<std::uint64_t>> count_spikes(const ForwardTrace<Real>& trace) {
  std::vector<std::vector<std::uint64_t>> counts(trace.layers.size());
  for (std::size_t l = 0; l < trace.layers.size(); ++l) {
    for (const auto& step : trace.layers[l].steps) {
      std::uint64_t c = 0;
      for (Real v : step.spikes.data()) c += (v == Real(1));
      counts[l].push_back(c);
    }
  }
  return counts;
}

template <typename Real>
std::uint64_t total_spikes(const ForwardTrace<Real>& trace) {
  std::uint64_t total = 0;
  for (const auto& layer : count_spikes(trace))
    for (std::uint64_t c : layer) total += c;
  return total;
}

#define SMOOTHSNN_INSTANTIATE(Real)                                                \
  template struct ModelParams<Real>;                                               \
  template ModelParams<Real> init_params(const ModelSpec&, RngState&);             \
  template ForwardTrace<Real> forward_unroll(const ModelSpec&,                     \
                                             const ModelParams<Real>&,             \
                                             const Tensor<Real>&,                  \
                                             const ForwardOptions&);               \
  template SpikingLayerGrad<Real> spiking_layer_backward(                          \
      const LayerTrace<Real>&, const std::vector<Tensor<Real>>&,                   \
      const NeuronConfig&, bool, AlphaGradient, const std::vector<Tensor<Real>>*); \
  template Gradients<Real> backward_bptt(const ModelSpec&, const ModelParams<Real>&, \
                                         const ForwardTrace<Real>&,                \
                                         const Tensor<Real>&);                     \
  template std::vector<std::vector<std::uint64_t>> count_spikes(                   \
      const ForwardTrace<Real>&);                                                  \
  template std::uint64_t total_spikes(const ForwardTrace<Real>&);

SMOOTHSNN_INSTANTIATE(float)
SMOOTHSNN_INSTANTIATE(double)

#undef SMOOTHSNN_INSTANTIATE

}  // namespace smoothsnn
