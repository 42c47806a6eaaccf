#include "smoothsnn/neuron.hpp"

#include <cmath>
#include <string>

#include "smoothsnn/errors.hpp"

namespace smoothsnn {

void NeuronConfig::validate() const {
  if (!(tau > 1.0)) {
    throw ParameterError("tau must be > 1, got " + std::to_string(tau));
  }
  if (!(threshold > 0.0)) {
    throw ParameterError("threshold must be > 0, got " +
                         std::to_string(threshold));
  }
  if (!(surrogate_width > 0.0)) {
    throw ParameterError("surrogate_width must be > 0, got " +
                         std::to_string(surrogate_width));
  }
  if (mp_init.kind == MpInit::Kind::UniformRandom && !(mp_init.low < mp_init.high)) {
    throw ParameterError("mp_init range must satisfy low < high");
  }
}

double alpha_from_beta(double beta) {
  const double a = 1.0 / (1.0 + std::exp(-beta));
  if (a < kAlphaMin) return kAlphaMin;
  if (a > kAlphaMax) return kAlphaMax;
  return a;
}

double dalpha_dbeta(double beta) {
  const double a = 1.0 / (1.0 + std::exp(-beta));
  if (a < kAlphaMin || a > kAlphaMax) return 0.0;
  return a * (1.0 - a);
}

namespace {

template <typename Real>
void fire_and_reset(LayerState<Real>& s, const NeuronConfig& cfg) {
  const Real threshold = Real(cfg.threshold);
  s.spikes = Tensor<Real>(s.h_pre.shape());
  s.h = Tensor<Real>(s.h_pre.shape());
  for (std::size_t i = 0; i < s.h_pre.size(); ++i) {
    const Real spike = spike_scalar(s.h_pre[i], cfg);
    s.spikes[i] = spike;
    s.h[i] = s.h_pre[i] - spike * threshold;
  }
}

}  // namespace

template <typename Real>
LayerState<Real> lif_step(const Tensor<Real>& prev_h, const Tensor<Real>& input,
                          const NeuronConfig& cfg) {
  require_same_shape(prev_h, input, "lif_step");
  const Real decay = Real(1) - Real(1) / Real(cfg.tau);
  LayerState<Real> s;
  s.current = input;
  s.u = Tensor<Real>(prev_h.shape());
  s.h_pre = Tensor<Real>(prev_h.shape());
  for (std::size_t i = 0; i < prev_h.size(); ++i) {
    s.u[i] = decay * prev_h[i];
    s.h_pre[i] = s.u[i] + input[i];
  }
  s.h_smooth = s.h_pre;
  fire_and_reset(s, cfg);
  return s;
}

template <typename Real>
LayerState<Real> smoothed_lif_step(const Tensor<Real>& prev_h,
                                   const Tensor<Real>& prev_h_smooth,
                                   const Tensor<Real>& input,
                                   const NeuronConfig& cfg, Real alpha) {
  require_same_shape(prev_h, input, "smoothed_lif_step");
  require_same_shape(prev_h, prev_h_smooth, "smoothed_lif_step");
  if (!(alpha > Real(0) && alpha < Real(1))) {
    throw ParameterError("smoothing alpha must lie in (0,1), got " +
                         std::to_string(static_cast<double>(alpha)));
  }
  const Real decay = Real(1) - Real(1) / Real(cfg.tau);
  const Real keep = Real(1) - alpha;
  LayerState<Real> s;
  s.current = input;
  s.u = Tensor<Real>(prev_h.shape());
  s.h_smooth = Tensor<Real>(prev_h.shape());
  s.h_pre = Tensor<Real>(prev_h.shape());
  for (std::size_t i = 0; i < prev_h.size(); ++i) {
    s.u[i] = decay * prev_h[i];
    s.h_smooth[i] = alpha * prev_h_smooth[i] + keep * s.u[i];
    s.h_pre[i] = s.h_smooth[i] + input[i];
  }
  fire_and_reset(s, cfg);
  return s;
}

template <typename Real>
Tensor<Real> surrogate_grad(const Tensor<Real>& h_pre, const NeuronConfig& cfg) {
  Tensor<Real> out(h_pre.shape());
  for (std::size_t i = 0; i < h_pre.size(); ++i) {
    out[i] = surrogate_grad_scalar(h_pre[i], cfg);
  }
  return out;
}

template <typename Real>
Tensor<Real> dspike_dalpha_local(const Tensor<Real>& h_pre,
                                 const Tensor<Real>& prev_h_smooth,
                                 const Tensor<Real>& u, const NeuronConfig& cfg) {
  require_same_shape(h_pre, prev_h_smooth, "dspike_dalpha_local");
  require_same_shape(h_pre, u, "dspike_dalpha_local");
  Tensor<Real> out(h_pre.shape());
  for (std::size_t i = 0; i < h_pre.size(); ++i) {
    out[i] = surrogate_grad_scalar(h_pre[i], cfg) * (prev_h_smooth[i] - u[i]);
  }
  return out;
}

#define SMOOTHSNN_INSTANTIATE(Real)                                              \
  template LayerState<Real> lif_step(const Tensor<Real>&, const Tensor<Real>&,   \
                                     const NeuronConfig&);                       \
  template LayerState<Real> smoothed_lif_step(                                   \
      const Tensor<Real>&, const Tensor<Real>&, const Tensor<Real>&,             \
      const NeuronConfig&, Real);                                                \
  template Tensor<Real> surrogate_grad(const Tensor<Real>&, const NeuronConfig&); \
  template Tensor<Real> dspike_dalpha_local(const Tensor<Real>&,                 \
                                            const Tensor<Real>&,                 \
                                            const Tensor<Real>&,                 \
                                            const NeuronConfig&);

SMOOTHSNN_INSTANTIATE(float)
SMOOTHSNN_INSTANTIATE(double)

#undef SMOOTHSNN_INSTANTIATE

}  // namespace smoothsnn
