#pragma once

// Stand-alone trainer for the plain spiking network: LIF hidden layers with
// soft reset, leaky-integrator readout, cross-entropy on the time-averaged
// output, BPTT with the rectangular surrogate, SGD with momentum and weight
// decay. It shares only data plumbing and the seeded generators with the
// library, and evaluates every float expression in the same order, so its
// parameters can be compared bit for bit.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "smoothsnn/data.hpp"
#include "smoothsnn/rng.hpp"
#include "smoothsnn/training.hpp"

namespace oracle {

struct VanillaRun {
  std::vector<std::vector<float>> weights;  // [l][out * in]
};

inline VanillaRun train_vanilla(const std::vector<std::size_t>& sizes,
                                const smoothsnn::SpikeDataset& pool, std::size_t T,
                                std::size_t epochs, std::size_t batch_size, double lr0,
                                std::size_t decay_every, double weight_decay,
                                double momentum, double val_fraction, std::uint64_t seed,
                                double tau = 2.0, double threshold = 1.0, double width = 1.0) {
  using smoothsnn::RngState;
  using smoothsnn::SeedStream;
  using smoothsnn::stream_seed;
  const std::size_t L = sizes.size() - 1;
  const std::size_t C = sizes.back();

  const auto split = smoothsnn::split_dataset(pool, val_fraction,
                                              stream_seed(seed, SeedStream::ValidationSplit));
  const smoothsnn::SpikeDataset& data = split.first;
  RngState init(stream_seed(seed, SeedStream::Init));
  RngState shuffle(stream_seed(seed, SeedStream::Shuffle));

  VanillaRun run;
  std::vector<std::vector<float>> vel(L);
  for (std::size_t l = 0; l < L; ++l) {
    const double bound = std::sqrt(1.0 / static_cast<double>(sizes[l]));
    for (std::size_t i = 0; i < sizes[l + 1] * sizes[l]; ++i) {
      run.weights.resize(L);
      run.weights[l].push_back(static_cast<float>((2.0 * init.uniform() - 1.0) * bound));
    }
    vel[l].assign(run.weights[l].size(), 0.0f);
  }

  const float leak = 1.0f - 1.0f / static_cast<float>(tau);
  const float thr = static_cast<float>(threshold);
  const float half = static_cast<float>(width / 2.0);
  const float inv_width = static_cast<float>(1.0 / width);
  const std::size_t n = data.samples;
  std::vector<std::size_t> order(n);

  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    double divisor = 1.0;
    for (std::size_t k = epoch / decay_every; k > 0; --k) divisor *= 10.0;
    const float lr = static_cast<float>(lr0 / divisor);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

    for (std::size_t lo = 0; lo < n; lo += batch_size) {
      const std::size_t B = std::min(batch_size, n - lo);
      // x[l][t][b][i]: input of weight layer l; hpre[l][t][b][o]: its charge.
      std::vector<std::vector<std::vector<std::vector<float>>>> x(L + 1), hpre(L);
      x[0].assign(T, std::vector<std::vector<float>>(B, std::vector<float>(sizes[0])));
      for (std::size_t t = 0; t < T; ++t)
        for (std::size_t b = 0; b < B; ++b)
          for (std::size_t c = 0; c < sizes[0]; ++c)
            x[0][t][b][c] = static_cast<float>(data.spike(order[lo + b], t, c));

      for (std::size_t l = 0; l < L; ++l) {
        const std::size_t in = sizes[l], out = sizes[l + 1];
        std::vector<std::vector<float>> h(B, std::vector<float>(out, 0.0f));
        x[l + 1].assign(T, std::vector<std::vector<float>>(B, std::vector<float>(out)));
        hpre[l].assign(T, std::vector<std::vector<float>>(B, std::vector<float>(out)));
        for (std::size_t t = 0; t < T; ++t)
          for (std::size_t b = 0; b < B; ++b)
            for (std::size_t o = 0; o < out; ++o) {
              float cur = 0.0f;
              for (std::size_t i = 0; i < in; ++i) cur += x[l][t][b][i] * run.weights[l][o * in + i];
              const float v = leak * h[b][o] + cur;
              hpre[l][t][b][o] = v;
              if (l + 1 == L) {
                h[b][o] = v;
                x[l + 1][t][b][o] = v;
              } else {
                const float s = v >= thr ? 1.0f : 0.0f;
                h[b][o] = v - s * thr;
                x[l + 1][t][b][o] = s;
              }
            }
      }

      // Cross-entropy of the time-averaged output.
      std::vector<std::vector<float>> gout(B, std::vector<float>(C));
      for (std::size_t b = 0; b < B; ++b) {
        std::vector<float> mean(C, 0.0f);
        for (std::size_t t = 0; t < T; ++t)
          for (std::size_t c = 0; c < C; ++c) mean[c] += x[L][t][b][c];
        for (auto& m : mean) m /= static_cast<float>(T);
        float mx = mean[0];
        for (std::size_t c = 1; c < C; ++c) mx = std::max(mx, mean[c]);
        float z = 0.0f;
        for (std::size_t c = 0; c < C; ++c) z += std::exp(mean[c] - mx);
        const float log_z = mx + std::log(z);
        const std::uint32_t y = data.labels[order[lo + b]];
        for (std::size_t c = 0; c < C; ++c) {
          gout[b][c] = (std::exp(mean[c] - log_z) - (c == y ? 1.0f : 0.0f)) /
                       (static_cast<float>(B) * static_cast<float>(T));
        }
      }

      // g[t][b][o]: gradient at the charge of the current layer.
      std::vector<std::vector<std::vector<float>>> g(
          T, std::vector<std::vector<float>>(B, std::vector<float>(C)));
      std::vector<std::vector<float>> carry(B, std::vector<float>(C, 0.0f));
      for (std::size_t t = T; t-- > 0;)
        for (std::size_t b = 0; b < B; ++b)
          for (std::size_t c = 0; c < C; ++c) {
            g[t][b][c] = gout[b][c] + carry[b][c];
            carry[b][c] = leak * g[t][b][c];
          }

      std::vector<std::vector<float>> grad_w(L);
      for (std::size_t l = L; l-- > 0;) {
        const std::size_t in = sizes[l], out = sizes[l + 1];
        grad_w[l].assign(out * in, 0.0f);
        for (std::size_t t = 0; t < T; ++t)
          for (std::size_t o = 0; o < out; ++o)
            for (std::size_t i = 0; i < in; ++i) {
              float acc = 0.0f;
              for (std::size_t b = 0; b < B; ++b) acc += g[t][b][o] * x[l][t][b][i];
              grad_w[l][o * in + i] += acc;
            }
        if (l == 0) break;

        // Into the spikes of layer l-1, then back through its neurons.
        std::vector<std::vector<std::vector<float>>> gs(
            T, std::vector<std::vector<float>>(B, std::vector<float>(in)));
        for (std::size_t t = 0; t < T; ++t)
          for (std::size_t b = 0; b < B; ++b)
            for (std::size_t i = 0; i < in; ++i) {
              float acc = 0.0f;
              for (std::size_t o = 0; o < out; ++o) acc += g[t][b][o] * run.weights[l][o * in + i];
              gs[t][b][i] = acc;
            }
        std::vector<std::vector<std::vector<float>>> gp(
            T, std::vector<std::vector<float>>(B, std::vector<float>(in)));
        std::vector<std::vector<float>> gh(B, std::vector<float>(in, 0.0f));
        for (std::size_t t = T; t-- > 0;)
          for (std::size_t b = 0; b < B; ++b)
            for (std::size_t i = 0; i < in; ++i) {
              const float diff = hpre[l - 1][t][b][i] - thr;
              const float sg = (diff < half && -diff < half) ? inv_width : 0.0f;
              const float from_spike = gs[t][b][i] - thr * gh[b][i];
              const float v = gh[b][i] + from_spike * sg;
              gp[t][b][i] = v;
              gh[b][i] = leak * v;
            }
        g = std::move(gp);
      }

      const float mu = static_cast<float>(momentum), wd = static_cast<float>(weight_decay);
      for (std::size_t l = 0; l < L; ++l)
        for (std::size_t i = 0; i < run.weights[l].size(); ++i) {
          const float step = grad_w[l][i] + wd * run.weights[l][i];
          vel[l][i] = mu * vel[l][i] + step;
          run.weights[l][i] -= lr * vel[l][i];
        }
    }
  }
  return run;
}

}  // namespace oracle
