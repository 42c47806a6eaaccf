#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "smoothsnn/data.hpp"
#include "smoothsnn/network.hpp"

namespace smoothsnn {

enum class RangeMode {
  Pooled,  // min/max over every timestep of the layer
  Fixed,   // [-2, 2] * threshold
};

/// Per-timestep statistics of one layer's pre-fire membrane potential H_pre,
/// taken over every batch element and neuron.
struct DistributionStats {
  std::size_t layer = 0;
  std::vector<double> mean;    // [t]
  std::vector<double> stddev;  // [t], population
  std::vector<std::uint64_t> count;  // [t]
  std::size_t bins = 0;
  double range_lo = 0.0;
  double range_hi = 0.0;
  std::vector<std::vector<std::uint64_t>> histogram;  // [t][bin]
};

/// Values outside the range fall into the edge bins. A degenerate range
/// (every value equal) puts all mass in bin 0.
template <typename Real>
DistributionStats mp_stats(const ForwardTrace<Real>& trace, std::size_t layer,
                           std::size_t bins = 64, RangeMode mode = RangeMode::Pooled,
                           double threshold = 1.0);

/// Cosine similarity of consecutive histograms, T-1 values. Zero vectors
/// give 0.
std::vector<double> adjacent_cosine(const DistributionStats& stats);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// acc[k-1] is the accuracy of argmax((1/k) sum_{t<k} O_t), k = 1..T, from
/// per-sample logits (samples x T x C). Ties go to the lowest class.
template <typename Real>
std::vector<double> prefix_accuracies(const Tensor<Real>& sample_logits,
                                      std::span<const std::uint32_t> labels);

template <typename Real>
std::vector<double> prefix_ensemble_eval(const ModelSpec& spec,
                                         const ModelParams<Real>& params,
                                         const SpikeDataset& data,
                                         std::size_t batch_size = 256,
                                         std::uint64_t init_seed = 0,
                                         std::size_t threads = 1);

struct SensitivityQuery {
  double tau = 2.0;
  double alpha = 0.5;
  std::size_t delta_t = 1;
  std::optional<double> epsilon;  // defaults to 1 - 1/tau

  double effective_epsilon() const { return epsilon.value_or(1.0 - 1.0 / tau); }
};

struct SensitivityResult {
  double vanilla = 0.0;   // eps^dt
  double smoothed = 0.0;  // (1-alpha) eps (alpha + (1-alpha) eps)^(dt-1)
};

SensitivityResult temporal_sensitivity(const SensitivityQuery& q);

/// Rows of (sample, t, class, logit) in lexicographic order.
template <typename Real>
std::string logits_csv(const Tensor<Real>& sample_logits);

/// Parses logits_csv output back into a samples x T x C tensor.
Tensor<float> parse_logits_csv(std::string_view text);

template <typename Real>
std::string export_logits(const ModelSpec& spec, const ModelParams<Real>& params,
                          const SpikeDataset& data, std::size_t batch_size = 256,
                          std::uint64_t init_seed = 0);

std::string mp_stats_csv(const std::vector<DistributionStats>& stats);
std::string histogram_csv(const std::vector<DistributionStats>& stats);
std::string similarity_csv(const std::vector<DistributionStats>& stats);
std::string prefix_accuracy_csv(const std::vector<double>& acc);
std::string sensitivity_csv(const std::vector<SensitivityQuery>& queries);

}  // namespace smoothsnn
