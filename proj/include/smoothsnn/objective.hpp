#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "smoothsnn/rng.hpp"
#include "smoothsnn/tensor.hpp"

namespace smoothsnn {

enum class GuidanceMode { KL, MSE };

struct GuidanceConfig {
  double temperature = 2.0;       // softmax temperature of the KL guidance
  double drop_probability = 0.5;  // chance of dropping each non-max pair loss
  double gamma = 1.0;             // weight of the guidance term in the total loss
  GuidanceMode mode = GuidanceMode::KL;
  bool detach_teacher = true;     // no gradient into the later timestep

  void validate() const;
};

/// A scalar loss between an earlier ("student") and a later ("teacher")
/// output, with gradients for both sides. The caller decides whether the
/// teacher gradient is used.
template <typename Real>
struct PairLoss {
  Real loss = Real(0);
  Tensor<Real> grad_student;
  Tensor<Real> grad_teacher;
};

/// T^2 * KL(softmax(o_next / T) || softmax(o_t / T)), averaged over the batch.
template <typename Real>
PairLoss<Real> kl_guidance(const Tensor<Real>& o_t, const Tensor<Real>& o_next,
                           double temperature);

/// Mean of squared differences over all elements.
template <typename Real>
PairLoss<Real> mse_guidance(const Tensor<Real>& o_t, const Tensor<Real>& o_next);

struct DropResult {
  std::vector<double> weights;  // normalized; the largest loss always kept
  double combined = 0.0;
};

/// Keeps the largest loss (lowest index on ties), drops every other one with
/// probability `drop_probability`, and averages the survivors.
DropResult drop_combine(std::span<const double> losses, double drop_probability,
                        RngState& rng);

template <typename Real>
struct LossWithGrad {
  Real loss = Real(0);
  Tensor<Real> grad;
};

/// Cross-entropy of softmax((1/T) sum_t O_t) against labels, batch mean.
/// `logits` is T x batch x C; the gradient has the same shape.
template <typename Real>
LossWithGrad<Real> ce_ensemble(const Tensor<Real>& logits,
                               std::span<const std::uint32_t> labels);

inline double total_loss(double guidance, double ce, double gamma) {
  return gamma * guidance + ce;
}

/// Decomposition of an ensemble's loss into member cross-entropy, member
/// diversity and aggregated loss.
struct EnsembleMetrics {
  double member_ce = 0.0;   // L_s
  double diversity = 0.0;   // L_d
  double aggregate = 0.0;   // L_a
  double combined = 0.0;    // L_s + L_a - alpha_div * L_d
  double alpha_div = 0.0;
  std::vector<double> gamma_weights;
  std::size_t members = 0;
};

/// `member_logits` is N x batch x C. `gamma_weights` must sum to 1.
/// Diversity is 1 - (1/N) * sum over ordered pairs i != j of <q_i, q_j>,
/// with q the softmax, averaged over the batch.
template <typename Real>
EnsembleMetrics ensemble_metrics(const Tensor<Real>& member_logits,
                                 std::span<const std::uint32_t> labels,
                                 double alpha_div,
                                 std::span<const double> gamma_weights);

}  // namespace smoothsnn
