#include "smoothsnn/objective.hpp"

#include <cmath>
#include <string>

#include "smoothsnn/errors.hpp"

namespace smoothsnn {

void GuidanceConfig::validate() const {
  if (!(temperature > 0.0)) throw ParameterError("temperature must be > 0");
  if (!(drop_probability >= 0.0 && drop_probability <= 1.0)) {
    throw ParameterError("drop_probability out of [0,1]");
  }
  if (!(gamma >= 0.0)) throw ParameterError("gamma must be >= 0");
}

namespace {

void check_labels(std::span<const std::uint32_t> labels, std::size_t batch,
                  std::size_t classes) {
  if (labels.size() != batch) {
    throw DimensionError("expected " + std::to_string(batch) + " labels, got " +
                         std::to_string(labels.size()));
  }
  for (std::uint32_t y : labels) {
    if (y >= classes) {
      throw DataError("label " + std::to_string(y) + " out of range [0," +
                      std::to_string(classes) + ")");
    }
  }
}

// Batch-mean cross-entropy of softmax rows of `logits` (batch x C).
template <typename Real>
double mean_cross_entropy(const Tensor<Real>& logits,
                          std::span<const std::uint32_t> labels) {
  const Tensor<Real> logp = log_softmax_rows(logits, 1.0);
  double sum = 0.0;
  for (std::size_t b = 0; b < logits.dim(0); ++b) sum -= logp.at(b, labels[b]);
  return sum / static_cast<double>(logits.dim(0));
}

}  // namespace

template <typename Real>
PairLoss<Real> kl_guidance(const Tensor<Real>& o_t, const Tensor<Real>& o_next,
                           double temperature) {
  if (!(temperature > 0.0)) {
    throw ParameterError("kl_guidance temperature must be > 0");
  }
  require_same_shape(o_t, o_next, "kl_guidance");
  const Tensor<Real> logp = log_softmax_rows(o_t, temperature);
  const Tensor<Real> logq = log_softmax_rows(o_next, temperature);
  const std::size_t batch = o_t.dim(0), classes = o_t.dim(1);
  const Real t = Real(temperature);

  PairLoss<Real> out;
  out.grad_student = Tensor<Real>(o_t.shape());
  out.grad_teacher = Tensor<Real>(o_t.shape());
  Real total = 0;
  for (std::size_t b = 0; b < batch; ++b) {
    Real kl = 0;
    for (std::size_t j = 0; j < classes; ++j) {
      const Real q = std::exp(logq.at(b, j));
      kl += q * (logq.at(b, j) - logp.at(b, j));
    }
    total += kl;
    // d/d o_t = T (p - q) / B; d/d o_next = T q (log q - log p - KL) / B
    for (std::size_t j = 0; j < classes; ++j) {
      const Real p = std::exp(logp.at(b, j));
      const Real q = std::exp(logq.at(b, j));
      out.grad_student.at(b, j) = t * (p - q) / Real(batch);
      out.grad_teacher.at(b, j) =
          t * q * (logq.at(b, j) - logp.at(b, j) - kl) / Real(batch);
    }
  }
  out.loss = t * t * total / Real(batch);
  return out;
}

template <typename Real>
PairLoss<Real> mse_guidance(const Tensor<Real>& o_t, const Tensor<Real>& o_next) {
  require_same_shape(o_t, o_next, "mse_guidance");
  PairLoss<Real> out;
  out.grad_student = Tensor<Real>(o_t.shape());
  out.grad_teacher = Tensor<Real>(o_t.shape());
  const Real n = Real(o_t.size());
  Real sum = 0;
  for (std::size_t i = 0; i < o_t.size(); ++i) {
    const Real d = o_t[i] - o_next[i];
    sum += d * d;
    out.grad_student[i] = Real(2) * d / n;
    out.grad_teacher[i] = -Real(2) * d / n;
  }
  out.loss = o_t.size() ? sum / n : Real(0);
  return out;
}

DropResult drop_combine(std::span<const double> losses, double drop_probability,
                        RngState& rng) {
  if (losses.empty()) throw ParameterError("drop_combine needs at least one loss");
  if (!(drop_probability >= 0.0 && drop_probability <= 1.0)) {
    throw ParameterError("drop_probability out of [0,1]");
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < losses.size(); ++i) {
    if (losses[i] > losses[best]) best = i;
  }
  DropResult out;
  out.weights.assign(losses.size(), 1.0);
  for (std::size_t i = 0; i < losses.size(); ++i) {
    if (i == best) continue;
    if (rng.uniform() < drop_probability) out.weights[i] = 0.0;
  }
  double kept = 0.0;
  for (double w : out.weights) kept += w;
  for (double& w : out.weights) w /= kept;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    out.combined += out.weights[i] * losses[i];
  }
  return out;
}

template <typename Real>
LossWithGrad<Real> ce_ensemble(const Tensor<Real>& logits,
                               std::span<const std::uint32_t> labels) {
  if (logits.rank() != 3) {
    throw DimensionError("ce_ensemble expects [T x batch x C], got " +
                         shape_to_string(logits.shape()));
  }
  const std::size_t T = logits.dim(0), batch = logits.dim(1), classes = logits.dim(2);
  check_labels(labels, batch, classes);
  Tensor<Real> mean({batch, classes});
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t i = 0; i < batch * classes; ++i) mean[i] += logits[t * batch * classes + i];
  for (auto& v : mean.data()) v /= Real(T);

  const Tensor<Real> logp = log_softmax_rows(mean, 1.0);
  LossWithGrad<Real> out;
  out.grad = Tensor<Real>(logits.shape());
  Real total = 0;
  for (std::size_t b = 0; b < batch; ++b) {
    total -= logp.at(b, labels[b]);
    for (std::size_t c = 0; c < classes; ++c) {
      const Real g = (std::exp(logp.at(b, c)) - Real(c == labels[b])) /
                     (Real(batch) * Real(T));
      for (std::size_t t = 0; t < T; ++t) out.grad.at(t, b, c) = g;
    }
  }
  out.loss = total / Real(batch);
  return out;
}

template <typename Real>
EnsembleMetrics ensemble_metrics(const Tensor<Real>& member_logits,
                                 std::span<const std::uint32_t> labels,
                                 double alpha_div,
                                 std::span<const double> gamma_weights) {
  if (member_logits.rank() != 3) {
    throw DimensionError("ensemble_metrics expects [N x batch x C], got " +
                         shape_to_string(member_logits.shape()));
  }
  const std::size_t N = member_logits.dim(0), batch = member_logits.dim(1),
                    classes = member_logits.dim(2);
  check_labels(labels, batch, classes);
  if (gamma_weights.size() != N) {
    throw ParameterError("need one gamma weight per member");
  }
  double wsum = 0.0;
  for (double g : gamma_weights) wsum += g;
  if (std::abs(wsum - 1.0) > 1e-6) {
    throw ParameterError("gamma weights must sum to 1, got " + std::to_string(wsum));
  }

  EnsembleMetrics m;
  m.alpha_div = alpha_div;
  m.gamma_weights.assign(gamma_weights.begin(), gamma_weights.end());
  m.members = N;

  std::vector<Tensor<Real>> probs;
  Tensor<Real> aggregate({batch, classes});
  for (std::size_t i = 0; i < N; ++i) {
    const Tensor<Real> member = member_logits.slice(i);
    m.member_ce += mean_cross_entropy(member, labels);
    probs.push_back(softmax_rows(member, 1.0));
    axpy(aggregate, Real(gamma_weights[i]), member);
  }
  m.member_ce /= static_cast<double>(N);

  double pair_sum = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t i = 0; i < N; ++i) {
      for (std::size_t j = 0; j < N; ++j) {
        if (i == j) continue;
        double dot = 0.0;
        for (std::size_t c = 0; c < classes; ++c) {
          dot += static_cast<double>(probs[i].at(b, c)) * probs[j].at(b, c);
        }
        pair_sum += dot;
      }
    }
  }
  m.diversity = 1.0 - pair_sum / static_cast<double>(batch) / static_cast<double>(N);
  m.aggregate = mean_cross_entropy(aggregate, labels);
  m.combined = m.member_ce + m.aggregate - alpha_div * m.diversity;
  return m;
}

#define SMOOTHSNN_INSTANTIATE(Real)                                                 \
  template PairLoss<Real> kl_guidance(const Tensor<Real>&, const Tensor<Real>&,     \
                                      double);                                      \
  template PairLoss<Real> mse_guidance(const Tensor<Real>&, const Tensor<Real>&);   \
  template LossWithGrad<Real> ce_ensemble(const Tensor<Real>&,                      \
                                          std::span<const std::uint32_t>);          \
  template EnsembleMetrics ensemble_metrics(const Tensor<Real>&,                    \
                                            std::span<const std::uint32_t>, double, \
                                            std::span<const double>);

SMOOTHSNN_INSTANTIATE(float)
SMOOTHSNN_INSTANTIATE(double)

#undef SMOOTHSNN_INSTANTIATE

}  // namespace smoothsnn
