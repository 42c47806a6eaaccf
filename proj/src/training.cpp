#include "smoothsnn/training.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <numeric>
#include <thread>

#include "smoothsnn/errors.hpp"
#include "smoothsnn/io.hpp"

namespace smoothsnn {

void TrainConfig::validate() const {
  if (T < 1) throw ParameterError("T must be >= 1");
  if (epochs < 1) throw ParameterError("epochs must be >= 1");
  if (batch_size < 1) throw ParameterError("batch_size must be >= 1");
  if (!(lr0 > 0.0)) throw ParameterError("lr0 must be > 0");
  if (lr_decay_every < 1) throw ParameterError("lr_decay_every must be >= 1");
  if (!(weight_decay >= 0.0)) throw ParameterError("weight_decay must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ParameterError("momentum out of [0,1)");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) {
    throw ParameterError("val_fraction out of [0,1)");
  }
  guidance.validate();
}

template <typename Real>
OptimizerState<Real> OptimizerState<Real>::zeros_like(const ModelParams<Real>& params) {
  OptimizerState st;
  for (const auto& w : params.weights) st.velocity.weights.emplace_back(w.shape());
  st.velocity.betas.assign(params.betas.size(), Real(0));
  for (const auto& s : params.norm_scale) st.velocity.norm_scale.emplace_back(s.shape());
  for (const auto& s : params.norm_shift) st.velocity.norm_shift.emplace_back(s.shape());
  return st;
}

namespace {

template <typename Real>
void momentum_update(std::span<Real> theta, std::span<const Real> grad,
                     std::span<Real> velocity, Real lr, Real mu, Real wd) {
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const Real g = grad[i] + wd * theta[i];
    velocity[i] = mu * velocity[i] + g;
    theta[i] -= lr * velocity[i];
  }
}

template <typename Real>
void update_group(std::vector<Tensor<Real>>& theta, const std::vector<Tensor<Real>>& grad,
                  std::vector<Tensor<Real>>& velocity, Real lr, Real mu, Real wd,
                  const char* what) {
  if (theta.size() != grad.size() || theta.size() != velocity.size()) {
    throw ConsistencyError(std::string("sgd_step: ") + what + " count mismatch");
  }
  for (std::size_t l = 0; l < theta.size(); ++l) {
    if (!theta[l].same_shape(grad[l]) || !theta[l].same_shape(velocity[l])) {
      throw ConsistencyError(std::string("sgd_step: ") + what + " " + std::to_string(l) +
                             " shape mismatch");
    }
    momentum_update<Real>(theta[l].data(), grad[l].data(), velocity[l].data(), lr, mu, wd);
  }
}

}  // namespace

template <typename Real>
void sgd_step(ModelParams<Real>& params, const Gradients<Real>& grads,
              OptimizerState<Real>& opt, double lr, double momentum,
              double weight_decay) {
  const Real r = Real(lr), mu = Real(momentum), wd = Real(weight_decay);
  update_group(params.weights, grads.weights, opt.velocity.weights, r, mu, wd, "weight");
  if (params.betas.size() != grads.betas.size() ||
      params.betas.size() != opt.velocity.betas.size()) {
    throw ConsistencyError("sgd_step: smoothing parameter count mismatch");
  }
  momentum_update<Real>(params.betas, grads.betas, opt.velocity.betas, r, mu, Real(0));
  update_group(params.norm_scale, grads.norm_scale, opt.velocity.norm_scale, r, mu,
               Real(0), "norm scale");
  update_group(params.norm_shift, grads.norm_shift, opt.velocity.norm_shift, r, mu,
               Real(0), "norm shift");
}

double lr_at(std::size_t epoch, const TrainConfig& cfg) {
  double divisor = 1.0;
  for (std::size_t k = epoch / cfg.lr_decay_every; k > 0; --k) divisor *= 10.0;
  return cfg.lr0 / divisor;
}

std::uint64_t stream_seed(std::uint64_t seed, SeedStream stream) {
  return RngState(seed).split(static_cast<std::uint64_t>(stream)).next_u64();
}

template <typename Real>
std::size_t argmax(std::span<const Real> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

template <typename Real>
double ensemble_accuracy(const Tensor<Real>& sample_logits,
                         std::span<const std::uint32_t> labels) {
  if (sample_logits.rank() != 3) {
    throw DimensionError("ensemble_accuracy expects [samples x T x C], got " +
                         shape_to_string(sample_logits.shape()));
  }
  const std::size_t n = sample_logits.dim(0), T = sample_logits.dim(1),
                    C = sample_logits.dim(2);
  if (labels.size() != n) throw DimensionError("ensemble_accuracy label count mismatch");
  if (n == 0) return std::numeric_limits<double>::quiet_NaN();
  std::size_t correct = 0;
  std::vector<Real> mean(C);
  for (std::size_t s = 0; s < n; ++s) {
    std::fill(mean.begin(), mean.end(), Real(0));
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t c = 0; c < C; ++c) mean[c] += sample_logits.at(s, t, c);
    for (auto& v : mean) v /= Real(T);
    correct += argmax<Real>(mean) == labels[s];
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

std::size_t eval_threads_from_env() {
  const char* env = std::getenv("SMOOTHSNN_THREADS");
  if (!env) return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (end == env || *end != '\0' || v < 1) return 1;
  return static_cast<std::size_t>(v);
}

template <typename Real>
Tensor<Real> collect_logits(const ModelSpec& spec, const ModelParams<Real>& params,
                            const SpikeDataset& data, std::size_t batch_size,
                            std::uint64_t init_seed, std::size_t threads) {
  if (batch_size < 1) throw ParameterError("batch_size must be >= 1");
  if (data.channels != spec.input_size()) {
    throw ConsistencyError("dataset has " + std::to_string(data.channels) +
                           " channels, model expects " +
                           std::to_string(spec.input_size()));
  }
  const std::size_t n = data.samples, T = data.timesteps, C = spec.num_classes();
  Tensor<Real> out({n, T, C});
  const std::size_t batches = (n + batch_size - 1) / batch_size;
  std::vector<std::exception_ptr> errors(batches);
  const RngState root(init_seed);

  auto run_batch = [&](std::size_t b) {
    try {
      const std::size_t lo = b * batch_size, hi = std::min(n, lo + batch_size);
      std::vector<std::size_t> idx(hi - lo);
      std::iota(idx.begin(), idx.end(), lo);
      const ForwardOptions opts{root.split(b).next_u64()};
      const ForwardTrace<Real> trace =
          forward_unroll(spec, params, data.batch_input<Real>(idx), opts);
      for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t t = 0; t < T; ++t)
          for (std::size_t c = 0; c < C; ++c)
            out.at(lo + i, t, c) = trace.logits.at(t, i, c);
    } catch (...) {
      errors[b] = std::current_exception();
    }
  };

  const std::size_t workers = std::min(std::max<std::size_t>(threads, 1), batches);
  if (workers <= 1) {
    for (std::size_t b = 0; b < batches; ++b) run_batch(b);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t b = next++; b < batches; b = next++) run_batch(b);
      });
    }
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

template <typename Real>
TrainResult<Real> train(const ModelSpec& spec, const SpikeDataset& data,
                        const TrainConfig& cfg) {
  spec.validate();
  cfg.validate();
  data.validate();
  if (data.channels != spec.input_size()) {
    throw ConsistencyError("dataset has " + std::to_string(data.channels) +
                           " channels, model expects " +
                           std::to_string(spec.input_size()));
  }
  if (data.num_classes != spec.num_classes()) {
    throw ConsistencyError("dataset has " + std::to_string(data.num_classes) +
                           " classes, model outputs " +
                           std::to_string(spec.num_classes()));
  }
  if (data.timesteps != cfg.T) {
    throw ConsistencyError("dataset has T=" + std::to_string(data.timesteps) +
                           ", config asks for T=" + std::to_string(cfg.T));
  }

  const auto [train_set, val_set] =
      split_dataset(data, cfg.val_fraction, stream_seed(cfg.seed, SeedStream::ValidationSplit));
  if (train_set.samples == 0) throw DataError("no training samples after validation split");

  RngState init_rng(stream_seed(cfg.seed, SeedStream::Init));
  RngState shuffle_rng(stream_seed(cfg.seed, SeedStream::Shuffle));
  RngState drop_rng(stream_seed(cfg.seed, SeedStream::Drop));
  RngState mp_rng(stream_seed(cfg.seed, SeedStream::MembraneInit));
  const std::uint64_t eval_seed = stream_seed(cfg.seed, SeedStream::Evaluation);
  const std::size_t eval_threads = eval_threads_from_env();

  TrainResult<Real> result;
  result.params = init_params<Real>(spec, init_rng);
  auto opt = OptimizerState<Real>::zeros_like(result.params);

  const std::size_t n = train_set.samples, T = cfg.T, C = spec.num_classes();
  const GuidanceConfig& gc = cfg.guidance;
  std::vector<std::size_t> order(n);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_at(epoch, cfg);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.below(i)]);

    MetricsRecord rec;
    rec.epoch = epoch + 1;
    rec.lr = lr;
    std::size_t correct = 0;
    std::size_t batch_no = 0;
    for (std::size_t lo = 0; lo < n; lo += cfg.batch_size, ++batch_no) {
      const std::span<const std::size_t> idx =
          std::span<const std::size_t>(order).subspan(lo, std::min(cfg.batch_size, n - lo));
      const std::size_t B = idx.size();
      const auto labels = train_set.batch_labels(idx);
      const ForwardOptions fopts{mp_rng.next_u64()};
      const ForwardTrace<Real> trace =
          forward_unroll(spec, result.params, train_set.batch_input<Real>(idx), fopts);

      LossWithGrad<Real> ce = ce_ensemble(trace.logits, labels);
      Tensor<Real>& grad_logits = ce.grad;
      double guidance = 0.0;
      if (T >= 2) {
        std::vector<PairLoss<Real>> pairs;
        std::vector<double> losses;
        for (std::size_t t = 0; t + 1 < T; ++t) {
          const Tensor<Real> o_t = trace.logits.slice(t);
          const Tensor<Real> o_next = trace.logits.slice(t + 1);
          pairs.push_back(gc.mode == GuidanceMode::KL
                              ? kl_guidance(o_t, o_next, gc.temperature)
                              : mse_guidance(o_t, o_next));
          losses.push_back(static_cast<double>(pairs.back().loss));
        }
        const DropResult drop = drop_combine(losses, gc.drop_probability, drop_rng);
        guidance = drop.combined;
        if (gc.gamma != 0.0) {
          const std::size_t stride = B * C;
          for (std::size_t t = 0; t + 1 < T; ++t) {
            if (drop.weights[t] == 0.0) continue;
            const Real w = Real(gc.gamma * drop.weights[t]);
            for (std::size_t i = 0; i < stride; ++i) {
              grad_logits[t * stride + i] += w * pairs[t].grad_student[i];
            }
            if (!gc.detach_teacher) {
              for (std::size_t i = 0; i < stride; ++i) {
                grad_logits[(t + 1) * stride + i] += w * pairs[t].grad_teacher[i];
              }
            }
          }
        }
      }
      const double ce_loss = static_cast<double>(ce.loss);
      const double total = total_loss(guidance, ce_loss, gc.gamma);
      if (!std::isfinite(total)) {
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch + 1) +
                            ", batch " + std::to_string(batch_no) +
                            ": ce=" + format_real(ce_loss) +
                            " guidance=" + format_real(guidance) +
                            " total=" + format_real(total));
      }

      const Gradients<Real> grads = backward_bptt(spec, result.params, trace, grad_logits);
      sgd_step(result.params, grads, opt, lr, cfg.momentum, cfg.weight_decay);

      const double share = static_cast<double>(B) / static_cast<double>(n);
      rec.train_loss += total * share;
      rec.train_ce += ce_loss * share;
      rec.guidance_loss += guidance * share;
      rec.total_spikes += total_spikes(trace);
      std::vector<Real> mean(C);
      for (std::size_t b = 0; b < B; ++b) {
        std::fill(mean.begin(), mean.end(), Real(0));
        for (std::size_t t = 0; t < T; ++t)
          for (std::size_t c = 0; c < C; ++c) mean[c] += trace.logits.at(t, b, c);
        for (auto& v : mean) v /= Real(T);
        correct += argmax<Real>(mean) == labels[b];
      }
    }
    rec.train_acc = static_cast<double>(correct) / static_cast<double>(n);
    if (val_set.samples > 0) {
      const Tensor<Real> logits = collect_logits(spec, result.params, val_set,
                                                 cfg.batch_size, eval_seed, eval_threads);
      rec.val_acc = ensemble_accuracy(logits, std::span<const std::uint32_t>(val_set.labels));
    } else {
      rec.val_acc = std::numeric_limits<double>::quiet_NaN();
    }
    for (std::size_t l = 0; l < spec.num_spiking_layers(); ++l) {
      rec.alphas.push_back(spec.smoothing_enabled
                               ? alpha_from_beta(static_cast<double>(result.params.betas[l]))
                               : 0.0);
    }
    result.history.push_back(std::move(rec));
  }
  return result;
}

std::string metrics_csv(const std::vector<MetricsRecord>& history) {
  const std::size_t layers = history.empty() ? 0 : history.front().alphas.size();
  std::string out = "epoch,lr,train_loss,guidance_loss,train_acc,val_acc";
  for (std::size_t l = 0; l < layers; ++l) out += ",alpha_l" + std::to_string(l + 1);
  out += ",total_spikes\n";
  for (const auto& r : history) {
    out += std::to_string(r.epoch) + "," + format_real(r.lr) + "," +
           format_real(r.train_loss) + "," + format_real(r.guidance_loss) + "," +
           format_real(r.train_acc) + "," + format_real(r.val_acc);
    for (double a : r.alphas) out += "," + format_real(a);
    out += "," + std::to_string(r.total_spikes) + "\n";
  }
  return out;
}

void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<MetricsRecord>& history) {
  write_file_atomic(path, metrics_csv(history));
}

#define SMOOTHSNN_INSTANTIATE(Real)                                                   \
  template struct OptimizerState<Real>;                                               \
  template void sgd_step(ModelParams<Real>&, const Gradients<Real>&,                  \
                         OptimizerState<Real>&, double, double, double);              \
  template std::size_t argmax(std::span<const Real>);                                 \
  template double ensemble_accuracy(const Tensor<Real>&, std::span<const std::uint32_t>); \
  template Tensor<Real> collect_logits(const ModelSpec&, const ModelParams<Real>&,    \
                                       const SpikeDataset&, std::size_t, std::uint64_t, \
                                       std::size_t);                                  \
  template TrainResult<Real> train(const ModelSpec&, const SpikeDataset&,             \
                                   const TrainConfig&);

SMOOTHSNN_INSTANTIATE(float)
SMOOTHSNN_INSTANTIATE(double)

#undef SMOOTHSNN_INSTANTIATE

}  // namespace smoothsnn
