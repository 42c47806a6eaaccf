#include "smoothsnn/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "smoothsnn/errors.hpp"
#include "smoothsnn/io.hpp"
#include "smoothsnn/training.hpp"

namespace smoothsnn {

template <typename Real>
DistributionStats mp_stats(const ForwardTrace<Real>& trace, std::size_t layer,
                           std::size_t bins, RangeMode mode, double threshold) {
  if (layer >= trace.layers.size()) {
    throw ParameterError("mp_stats: layer " + std::to_string(layer) +
                         " out of range, trace has " +
                         std::to_string(trace.layers.size()));
  }
  if (bins < 1) throw ParameterError("mp_stats: bins must be >= 1");
  const auto& steps = trace.layers[layer].steps;
  if (steps.empty() || steps.front().h_pre.size() == 0) {
    throw DataError("mp_stats: empty trace");
  }

  DistributionStats st;
  st.layer = layer;
  st.bins = bins;
  if (mode == RangeMode::Fixed) {
    st.range_lo = -2.0 * threshold;
    st.range_hi = 2.0 * threshold;
  } else {
    st.range_lo = static_cast<double>(steps.front().h_pre[0]);
    st.range_hi = st.range_lo;
    for (const auto& s : steps) {
      for (Real v : s.h_pre.data()) {
        st.range_lo = std::min(st.range_lo, static_cast<double>(v));
        st.range_hi = std::max(st.range_hi, static_cast<double>(v));
      }
    }
  }
  const double width = st.range_hi - st.range_lo;

  for (const auto& s : steps) {
    const auto values = s.h_pre.data();
    const double n = static_cast<double>(values.size());
    // Shifted by the first value so a constant layer gives exactly c and 0.
    const double ref = static_cast<double>(values[0]);
    double sum = 0.0;
    for (Real v : values) sum += static_cast<double>(v) - ref;
    const double shift = sum / n;
    double sq = 0.0;
    for (Real v : values) {
      const double d = static_cast<double>(v) - ref - shift;
      sq += d * d;
    }
    st.mean.push_back(ref + shift);
    st.stddev.push_back(std::sqrt(sq / n));
    st.count.push_back(values.size());

    std::vector<std::uint64_t> hist(bins, 0);
    for (Real v : values) {
      std::size_t b = 0;
      if (width > 0.0) {
        const double pos = (static_cast<double>(v) - st.range_lo) / width *
                           static_cast<double>(bins);
        if (pos >= static_cast<double>(bins)) {
          b = bins - 1;
        } else if (pos > 0.0) {
          b = static_cast<std::size_t>(pos);
        }
      }
      ++hist[b];
    }
    st.histogram.push_back(std::move(hist));
  }
  return st;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("cosine_similarity: length mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<double> adjacent_cosine(const DistributionStats& stats) {
  std::vector<double> out;
  for (std::size_t t = 1; t < stats.histogram.size(); ++t) {
    const auto& h0 = stats.histogram[t - 1];
    const auto& h1 = stats.histogram[t];
    const std::vector<double> a(h0.begin(), h0.end()), b(h1.begin(), h1.end());
    out.push_back(cosine_similarity(a, b));
  }
  return out;
}

template <typename Real>
std::vector<double> prefix_accuracies(const Tensor<Real>& sample_logits,
                                      std::span<const std::uint32_t> labels) {
  if (sample_logits.rank() != 3) {
    throw DimensionError("prefix_accuracies expects [samples x T x C], got " +
                         shape_to_string(sample_logits.shape()));
  }
  const std::size_t n = sample_logits.dim(0), T = sample_logits.dim(1),
                    C = sample_logits.dim(2);
  if (labels.size() != n) throw DimensionError("prefix_accuracies label count mismatch");
  std::vector<std::size_t> correct(T, 0);
  std::vector<Real> sum(C), mean(C);
  for (std::size_t s = 0; s < n; ++s) {
    std::fill(sum.begin(), sum.end(), Real(0));
    for (std::size_t k = 1; k <= T; ++k) {
      for (std::size_t c = 0; c < C; ++c) {
        sum[c] += sample_logits.at(s, k - 1, c);
        mean[c] = sum[c] / Real(k);
      }
      correct[k - 1] += argmax<Real>(mean) == labels[s];
    }
  }
  std::vector<double> acc(T);
  for (std::size_t k = 0; k < T; ++k) {
    acc[k] = n ? static_cast<double>(correct[k]) / static_cast<double>(n)
               : std::nan("");
  }
  return acc;
}

template <typename Real>
std::vector<double> prefix_ensemble_eval(const ModelSpec& spec,
                                         const ModelParams<Real>& params,
                                         const SpikeDataset& data,
                                         std::size_t batch_size,
                                         std::uint64_t init_seed,
                                         std::size_t threads) {
  const Tensor<Real> logits =
      collect_logits(spec, params, data, batch_size, init_seed, threads);
  return prefix_accuracies(logits, std::span<const std::uint32_t>(data.labels));
}

SensitivityResult temporal_sensitivity(const SensitivityQuery& q) {
  const double eps = q.effective_epsilon();
  if (q.delta_t < 1) throw ParameterError("delta_t must be >= 1");
  if (!(eps >= 0.0 && eps < 1.0)) throw ParameterError("epsilon out of [0,1)");
  if (!(q.alpha >= 0.0 && q.alpha <= 1.0)) throw ParameterError("alpha out of [0,1]");
  const double dt = static_cast<double>(q.delta_t);
  SensitivityResult r;
  r.vanilla = std::pow(eps, dt);
  r.smoothed = (1.0 - q.alpha) * eps * std::pow(q.alpha + (1.0 - q.alpha) * eps, dt - 1.0);
  return r;
}

template <typename Real>
std::string logits_csv(const Tensor<Real>& sample_logits) {
  if (sample_logits.rank() != 3) {
    throw DimensionError("logits_csv expects [samples x T x C]");
  }
  std::string out = "sample,t,class,logit\n";
  for (std::size_t s = 0; s < sample_logits.dim(0); ++s)
    for (std::size_t t = 0; t < sample_logits.dim(1); ++t)
      for (std::size_t c = 0; c < sample_logits.dim(2); ++c) {
        out += std::to_string(s) + "," + std::to_string(t) + "," + std::to_string(c) +
               "," + format_real(static_cast<double>(sample_logits.at(s, t, c))) + "\n";
      }
  return out;
}

Tensor<float> parse_logits_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != "sample,t,class,logit") {
    throw DataError("logits CSV: expected header 'sample,t,class,logit'");
  }
  struct Row {
    std::size_t s, t, c;
    float v;
  };
  std::vector<Row> rows;
  std::size_t S = 0, T = 0, C = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    Row r{};
    char c1 = 0, c2 = 0, c3 = 0;
    double v = 0.0;
    row >> r.s >> c1 >> r.t >> c2 >> r.c >> c3 >> v;
    if (!row || c1 != ',' || c2 != ',' || c3 != ',') {
      throw DataError("logits CSV line " + std::to_string(line_no) + ": malformed row");
    }
    r.v = static_cast<float>(v);
    S = std::max(S, r.s + 1);
    T = std::max(T, r.t + 1);
    C = std::max(C, r.c + 1);
    rows.push_back(r);
  }
  if (rows.size() != S * T * C) {
    throw DataError("logits CSV: " + std::to_string(rows.size()) + " rows do not fill a " +
                    std::to_string(S) + "x" + std::to_string(T) + "x" +
                    std::to_string(C) + " table");
  }
  Tensor<float> out({S, T, C});
  for (const Row& r : rows) out.at(r.s, r.t, r.c) = r.v;
  return out;
}

template <typename Real>
std::string export_logits(const ModelSpec& spec, const ModelParams<Real>& params,
                          const SpikeDataset& data, std::size_t batch_size,
                          std::uint64_t init_seed) {
  return logits_csv(collect_logits(spec, params, data, batch_size, init_seed));
}

std::string mp_stats_csv(const std::vector<DistributionStats>& stats) {
  std::string out = "layer,t,mean,std,count\n";
  for (const auto& st : stats)
    for (std::size_t t = 0; t < st.mean.size(); ++t) {
      out += std::to_string(st.layer) + "," + std::to_string(t) + "," +
             format_real(st.mean[t]) + "," + format_real(st.stddev[t]) + "," +
             std::to_string(st.count[t]) + "\n";
    }
  return out;
}

std::string histogram_csv(const std::vector<DistributionStats>& stats) {
  std::string out = "layer,t,bin,bin_lo,bin_hi,count\n";
  for (const auto& st : stats) {
    const double w = (st.range_hi - st.range_lo) / static_cast<double>(st.bins);
    for (std::size_t t = 0; t < st.histogram.size(); ++t)
      for (std::size_t b = 0; b < st.bins; ++b) {
        out += std::to_string(st.layer) + "," + std::to_string(t) + "," +
               std::to_string(b) + "," +
               format_real(st.range_lo + w * static_cast<double>(b)) + "," +
               format_real(st.range_lo + w * static_cast<double>(b + 1)) + "," +
               std::to_string(st.histogram[t][b]) + "\n";
      }
  }
  return out;
}

std::string similarity_csv(const std::vector<DistributionStats>& stats) {
  std::string out = "layer,t_prev,t_next,cosine\n";
  for (const auto& st : stats) {
    const auto sim = adjacent_cosine(st);
    for (std::size_t i = 0; i < sim.size(); ++i) {
      out += std::to_string(st.layer) + "," + std::to_string(i) + "," +
             std::to_string(i + 1) + "," + format_real(sim[i]) + "\n";
    }
  }
  return out;
}

std::string prefix_accuracy_csv(const std::vector<double>& acc) {
  std::string out = "k,accuracy\n";
  for (std::size_t k = 0; k < acc.size(); ++k) {
    out += std::to_string(k + 1) + "," + format_real(acc[k]) + "\n";
  }
  return out;
}

std::string sensitivity_csv(const std::vector<SensitivityQuery>& queries) {
  std::string out = "tau,alpha,delta_t,epsilon,vanilla,smoothed,ratio\n";
  for (const auto& q : queries) {
    const SensitivityResult r = temporal_sensitivity(q);
    out += format_real(q.tau) + "," + format_real(q.alpha) + "," +
           std::to_string(q.delta_t) + "," + format_real(q.effective_epsilon()) + "," +
           format_real(r.vanilla) + "," + format_real(r.smoothed) + "," +
           format_real(r.vanilla > 0.0 ? r.smoothed / r.vanilla : std::nan("")) + "\n";
  }
  return out;
}

#define SMOOTHSNN_INSTANTIATE(Real)                                                    \
  template DistributionStats mp_stats(const ForwardTrace<Real>&, std::size_t,          \
                                      std::size_t, RangeMode, double);                 \
  template std::vector<double> prefix_accuracies(const Tensor<Real>&,                  \
                                                 std::span<const std::uint32_t>);      \
  template std::vector<double> prefix_ensemble_eval(                                   \
      const ModelSpec&, const ModelParams<Real>&, const SpikeDataset&, std::size_t,    \
      std::uint64_t, std::size_t);                                                     \
  template std::string logits_csv(const Tensor<Real>&);                                \
  template std::string export_logits(const ModelSpec&, const ModelParams<Real>&,       \
                                     const SpikeDataset&, std::size_t, std::uint64_t);

SMOOTHSNN_INSTANTIATE(float)
SMOOTHSNN_INSTANTIATE(double)

#undef SMOOTHSNN_INSTANTIATE

}  // namespace smoothsnn
