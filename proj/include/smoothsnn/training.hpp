#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "smoothsnn/checkpoint.hpp"
#include "smoothsnn/data.hpp"
#include "smoothsnn/network.hpp"
#include "smoothsnn/objective.hpp"

namespace smoothsnn {

struct TrainConfig {
  std::size_t T = 5;
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double lr0 = 0.1;
  std::size_t lr_decay_every = 30;  // epochs per tenfold decay
  double weight_decay = 1e-3;
  double momentum = 0.9;
  GuidanceConfig guidance;
  std::uint64_t seed = 0;
  FloatMode float_mode = FloatMode::Float32;
  double val_fraction = 0.1;

  void validate() const;
};

/// Momentum buffers shaped like the parameters they follow.
template <typename Real>
struct OptimizerState {
  ModelParams<Real> velocity;

  static OptimizerState zeros_like(const ModelParams<Real>& params);
};

/// g' = g + wd * w; v = momentum * v + g'; w -= lr * v. Smoothing and
/// normalization parameters take the same step without weight decay.
template <typename Real>
void sgd_step(ModelParams<Real>& params, const Gradients<Real>& grads,
              OptimizerState<Real>& opt, double lr, double momentum,
              double weight_decay);

/// lr0 * 0.1^floor(epoch / lr_decay_every), epoch counted from 0.
double lr_at(std::size_t epoch, const TrainConfig& cfg);

struct MetricsRecord {
  std::size_t epoch = 0;  // 1-based
  double lr = 0.0;
  double train_loss = 0.0;     // mean total loss over training samples
  double train_ce = 0.0;
  double guidance_loss = 0.0;  // mean combined guidance loss
  double train_acc = 0.0;      // running accuracy during the epoch
  double val_acc = 0.0;
  std::vector<double> alphas;  // per spiking layer; 0 without smoothing
  std::uint64_t total_spikes = 0;
};

template <typename Real>
struct TrainResult {
  ModelParams<Real> params;
  std::vector<MetricsRecord> history;
};

/// Independent generator streams derived from the run seed.
enum class SeedStream : std::uint64_t {
  Init = 0,
  ValidationSplit = 1,
  Shuffle = 2,
  Drop = 3,
  MembraneInit = 4,
  Evaluation = 5,
};

std::uint64_t stream_seed(std::uint64_t seed, SeedStream stream);

/// Trains on `data` after holding out cfg.val_fraction for validation.
template <typename Real>
TrainResult<Real> train(const ModelSpec& spec, const SpikeDataset& data,
                        const TrainConfig& cfg);

/// Per-sample outputs over time, samples x T x C, evaluated in batches of
/// `batch_size`. Batches may run on up to `threads` workers; each writes its
/// own rows so the result does not depend on the thread count.
template <typename Real>
Tensor<Real> collect_logits(const ModelSpec& spec, const ModelParams<Real>& params,
                            const SpikeDataset& data, std::size_t batch_size,
                            std::uint64_t init_seed, std::size_t threads = 1);

/// Index of the largest entry; the lowest index wins ties.
template <typename Real>
std::size_t argmax(std::span<const Real> values);

/// Accuracy of argmax((1/T) sum_t O_t).
template <typename Real>
double ensemble_accuracy(const Tensor<Real>& sample_logits,
                         std::span<const std::uint32_t> labels);

/// Thread count from SMOOTHSNN_THREADS; 1 when unset or invalid.
std::size_t eval_threads_from_env();

std::string metrics_csv(const std::vector<MetricsRecord>& history);
void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<MetricsRecord>& history);

}  // namespace smoothsnn
