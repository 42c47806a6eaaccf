#pragma once

// Scalar, step-by-step neuron oracles written straight from the update
// equations, one neuron at a time.

#include <vector>

namespace oracle {

template <typename Real>
struct NeuronTrace {
  std::vector<Real> h_pre;
  std::vector<Real> spikes;
  std::vector<Real> h;
  std::vector<Real> h_smooth;
};

// Charge H_pre = (1 - 1/tau) H + I, fire S = [H_pre >= thr], soft reset.
template <typename Real>
NeuronTrace<Real> vanilla_lif(const std::vector<Real>& input, double tau, double thr,
                              Real h0 = Real(0)) {
  NeuronTrace<Real> out;
  const Real leak = Real(1) - Real(1) / Real(tau);
  Real h = h0;
  for (Real x : input) {
    const Real charged = leak * h + x;
    const Real s = charged >= Real(thr) ? Real(1) : Real(0);
    h = charged - s * Real(thr);
    out.h_pre.push_back(charged);
    out.spikes.push_back(s);
    out.h.push_back(h);
    out.h_smooth.push_back(charged);
  }
  return out;
}

// Leak, then blend with the previous smoothed potential, then charge, fire
// and soft-reset. Both H(0) and H~(0) start at h0.
template <typename Real>
NeuronTrace<Real> smoothed_lif(const std::vector<Real>& input, double tau, double thr,
                               Real alpha, Real h0 = Real(0)) {
  NeuronTrace<Real> out;
  const Real leak = Real(1) - Real(1) / Real(tau);
  Real h = h0;
  Real hs = h0;
  for (Real x : input) {
    const Real leaked = leak * h;
    hs = alpha * hs + (Real(1) - alpha) * leaked;
    const Real charged = hs + x;
    const Real s = charged >= Real(thr) ? Real(1) : Real(0);
    h = charged - s * Real(thr);
    out.h_pre.push_back(charged);
    out.spikes.push_back(s);
    out.h.push_back(h);
    out.h_smooth.push_back(hs);
  }
  return out;
}

}  // namespace oracle
