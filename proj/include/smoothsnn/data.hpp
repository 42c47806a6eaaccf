#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "smoothsnn/tensor.hpp"

namespace smoothsnn {

/// Binary spike inputs with integer labels. Spikes are stored one byte per
/// entry in samples x T x channels order.
struct SpikeDataset {
  std::size_t samples = 0;
  std::size_t timesteps = 0;
  std::size_t channels = 0;
  std::size_t num_classes = 0;
  std::vector<std::uint8_t> spikes;
  std::vector<std::uint32_t> labels;

  // Metadata; not persisted by the SPK1 format and ignored by operator==.
  std::string task;
  std::uint64_t seed = 0;

  std::uint8_t spike(std::size_t s, std::size_t t, std::size_t c) const {
    return spikes[(s * timesteps + t) * channels + c];
  }
  std::uint8_t& spike(std::size_t s, std::size_t t, std::size_t c) {
    return spikes[(s * timesteps + t) * channels + c];
  }

  /// Throws DataError if sizes disagree, spikes are not binary or a label
  /// is out of range.
  void validate() const;

  /// Rows `indices` laid out as T x batch x channels for forward_unroll.
  template <typename Real>
  Tensor<Real> batch_input(std::span<const std::size_t> indices) const;
  std::vector<std::uint32_t> batch_labels(std::span<const std::size_t> indices) const;

  SpikeDataset subset(std::span<const std::size_t> indices) const;

  friend bool operator==(const SpikeDataset& a, const SpikeDataset& b) {
    return a.samples == b.samples && a.timesteps == b.timesteps &&
           a.channels == b.channels && a.num_classes == b.num_classes &&
           a.spikes == b.spikes && a.labels == b.labels;
  }
};

/// Each class gets a frozen random binary template (density 0.3); samples
/// are the template with each bit flipped independently with probability
/// `jitter_prob`. Samples are ordered class by class.
SpikeDataset gen_temporal_patterns(std::size_t n_classes, std::size_t channels,
                                   std::size_t timesteps,
                                   std::size_t samples_per_class,
                                   double jitter_prob, std::uint64_t seed);

inline constexpr double kTemplateDensity = 0.3;

/// Rate coding: spike at (s,t,c) iff a uniform draw < values[s,c].
template <typename Real>
Tensor<Real> poisson_encode(const Tensor<Real>& values, std::size_t timesteps,
                            std::uint64_t seed);

/// Seeded shuffle, then the last round(fraction * n) samples go to `second`.
std::pair<SpikeDataset, SpikeDataset> split_dataset(const SpikeDataset& data,
                                                    double fraction,
                                                    std::uint64_t seed);

/// SPK1: "SPK1", u32 samples, T, channels, C (little endian), u32 labels,
/// then spikes bit-packed in samples x T x channels order, LSB first within
/// each byte, final byte zero-padded.
std::string encode_dataset(const SpikeDataset& data);
SpikeDataset decode_dataset(std::string_view bytes);

void save_dataset(const std::filesystem::path& path, const SpikeDataset& data);
SpikeDataset load_dataset(const std::filesystem::path& path);

/// Hand-built fixtures: CSV with header "sample,t,channel", one row per spike.
SpikeDataset load_spike_csv(const std::filesystem::path& path,
                            std::vector<std::uint32_t> labels,
                            std::size_t timesteps, std::size_t channels,
                            std::size_t num_classes);

}  // namespace smoothsnn
