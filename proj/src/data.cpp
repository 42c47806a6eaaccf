#include "smoothsnn/data.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "smoothsnn/errors.hpp"
#include "smoothsnn/io.hpp"
#include "smoothsnn/rng.hpp"

namespace smoothsnn {

namespace {
constexpr char kMagic[4] = {'S', 'P', 'K', '1'};
constexpr std::size_t kHeaderBytes = 4 + 4 * 4;
}  // namespace

void SpikeDataset::validate() const {
  if (spikes.size() != samples * timesteps * channels) {
    throw DataError("dataset spike buffer holds " + std::to_string(spikes.size()) +
                    " entries, expected " +
                    std::to_string(samples * timesteps * channels));
  }
  if (labels.size() != samples) throw DataError("dataset label count != samples");
  for (std::uint8_t s : spikes) {
    if (s > 1) throw DataError("dataset spikes must be 0 or 1");
  }
  for (std::uint32_t y : labels) {
    if (y >= num_classes) {
      throw DataError("label " + std::to_string(y) + " out of range [0," +
                      std::to_string(num_classes) + ")");
    }
  }
}

template <typename Real>
Tensor<Real> SpikeDataset::batch_input(std::span<const std::size_t> indices) const {
  Tensor<Real> out({timesteps, indices.size(), channels});
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const std::size_t s = indices[b];
    for (std::size_t t = 0; t < timesteps; ++t)
      for (std::size_t c = 0; c < channels; ++c) out.at(t, b, c) = Real(spike(s, t, c));
  }
  return out;
}

template Tensor<float> SpikeDataset::batch_input(std::span<const std::size_t>) const;
template Tensor<double> SpikeDataset::batch_input(std::span<const std::size_t>) const;

std::vector<std::uint32_t> SpikeDataset::batch_labels(
    std::span<const std::size_t> indices) const {
  std::vector<std::uint32_t> out;
  out.reserve(indices.size());
  for (std::size_t s : indices) out.push_back(labels[s]);
  return out;
}

SpikeDataset SpikeDataset::subset(std::span<const std::size_t> indices) const {
  SpikeDataset out;
  out.samples = indices.size();
  out.timesteps = timesteps;
  out.channels = channels;
  out.num_classes = num_classes;
  out.task = task;
  out.seed = seed;
  const std::size_t row = timesteps * channels;
  out.spikes.reserve(indices.size() * row);
  for (std::size_t s : indices) {
    if (s >= samples) throw DataError("subset index out of range");
    out.spikes.insert(out.spikes.end(), spikes.begin() + s * row,
                      spikes.begin() + (s + 1) * row);
    out.labels.push_back(labels[s]);
  }
  return out;
}

SpikeDataset gen_temporal_patterns(std::size_t n_classes, std::size_t channels,
                                   std::size_t timesteps,
                                   std::size_t samples_per_class,
                                   double jitter_prob, std::uint64_t seed) {
  if (n_classes < 1 || channels < 1 || timesteps < 1 || samples_per_class < 1) {
    throw ParameterError("gen_temporal_patterns: all counts must be >= 1");
  }
  if (!(jitter_prob >= 0.0 && jitter_prob <= 1.0)) {
    throw ParameterError("gen_temporal_patterns: jitter_prob out of [0,1]");
  }
  const RngState root(seed);
  RngState template_rng = root.split(0);
  RngState sample_rng = root.split(1);
  const std::size_t row = timesteps * channels;

  std::vector<std::vector<std::uint8_t>> templates(n_classes,
                                                   std::vector<std::uint8_t>(row));
  for (auto& tpl : templates)
    for (auto& bit : tpl) bit = template_rng.uniform() < kTemplateDensity;

  SpikeDataset ds;
  ds.samples = n_classes * samples_per_class;
  ds.timesteps = timesteps;
  ds.channels = channels;
  ds.num_classes = n_classes;
  ds.task = "temporal_patterns";
  ds.seed = seed;
  ds.spikes.reserve(ds.samples * row);
  for (std::size_t k = 0; k < n_classes; ++k) {
    for (std::size_t i = 0; i < samples_per_class; ++i) {
      for (std::size_t j = 0; j < row; ++j) {
        const bool flip = sample_rng.uniform() < jitter_prob;
        ds.spikes.push_back(static_cast<std::uint8_t>(templates[k][j] ^ flip));
      }
      ds.labels.push_back(static_cast<std::uint32_t>(k));
    }
  }
  return ds;
}

template <typename Real>
Tensor<Real> poisson_encode(const Tensor<Real>& values, std::size_t timesteps,
                            std::uint64_t seed) {
  if (values.rank() != 2) {
    throw DimensionError("poisson_encode expects [samples x channels], got " +
                         shape_to_string(values.shape()));
  }
  for (Real v : values.data()) {
    if (!(v >= Real(0) && v <= Real(1))) {
      throw DataError("poisson_encode values must lie in [0,1]");
    }
  }
  const std::size_t samples = values.dim(0), channels = values.dim(1);
  RngState rng(seed);
  Tensor<Real> out({samples, timesteps, channels});
  for (std::size_t s = 0; s < samples; ++s)
    for (std::size_t t = 0; t < timesteps; ++t)
      for (std::size_t c = 0; c < channels; ++c)
        out.at(s, t, c) = rng.uniform() < static_cast<double>(values.at(s, c)) ? Real(1)
                                                                              : Real(0);
  return out;
}

template Tensor<float> poisson_encode(const Tensor<float>&, std::size_t, std::uint64_t);
template Tensor<double> poisson_encode(const Tensor<double>&, std::size_t, std::uint64_t);

std::pair<SpikeDataset, SpikeDataset> split_dataset(const SpikeDataset& data,
                                                    double fraction,
                                                    std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw ParameterError("split fraction out of [0,1]");
  }
  std::vector<std::size_t> order(data.samples);
  std::iota(order.begin(), order.end(), std::size_t{0});
  RngState rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng.below(i)]);
  }
  const auto second = static_cast<std::size_t>(
      std::llround(fraction * static_cast<double>(data.samples)));
  const std::size_t first = data.samples - second;
  const std::span<const std::size_t> all(order);
  return {data.subset(all.first(first)), data.subset(all.subspan(first))};
}

std::string encode_dataset(const SpikeDataset& data) {
  data.validate();
  std::string out(kMagic, 4);
  put_u32_le(out, static_cast<std::uint32_t>(data.samples));
  put_u32_le(out, static_cast<std::uint32_t>(data.timesteps));
  put_u32_le(out, static_cast<std::uint32_t>(data.channels));
  put_u32_le(out, static_cast<std::uint32_t>(data.num_classes));
  for (std::uint32_t y : data.labels) put_u32_le(out, y);
  std::string packed((data.spikes.size() + 7) / 8, '\0');
  for (std::size_t i = 0; i < data.spikes.size(); ++i) {
    if (data.spikes[i]) packed[i / 8] = static_cast<char>(packed[i / 8] | (1u << (i % 8)));
  }
  return out + packed;
}

SpikeDataset decode_dataset(std::string_view bytes) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 4 || bytes.substr(0, 4) != std::string_view(kMagic, 4)) {
    throw FormatError("bad magic, expected \"SPK1\"", 0);
  }
  if (bytes.size() < kHeaderBytes) {
    throw FormatError("truncated SPK1 header", bytes.size());
  }
  SpikeDataset ds;
  ds.samples = get_u32_le(p + 4);
  ds.timesteps = get_u32_le(p + 8);
  ds.channels = get_u32_le(p + 12);
  ds.num_classes = get_u32_le(p + 16);
  ds.task = "loaded";

  std::size_t offset = kHeaderBytes;
  const std::size_t label_bytes = 4 * ds.samples;
  if (bytes.size() < offset + label_bytes) {
    throw FormatError("truncated SPK1 label block", bytes.size());
  }
  ds.labels.reserve(ds.samples);
  for (std::size_t s = 0; s < ds.samples; ++s) {
    const std::uint32_t y = get_u32_le(p + offset + 4 * s);
    if (y >= ds.num_classes) {
      throw FormatError("label " + std::to_string(y) + " out of range",
                        offset + 4 * s);
    }
    ds.labels.push_back(y);
  }
  offset += label_bytes;
  const std::size_t bits = ds.samples * ds.timesteps * ds.channels;
  const std::size_t packed_bytes = (bits + 7) / 8;
  if (bytes.size() < offset + packed_bytes) {
    throw FormatError("truncated SPK1 spike block", bytes.size());
  }
  if (bytes.size() > offset + packed_bytes) {
    throw FormatError("trailing bytes after SPK1 spike block", offset + packed_bytes);
  }
  ds.spikes.resize(bits);
  for (std::size_t i = 0; i < bits; ++i) {
    ds.spikes[i] = (p[offset + i / 8] >> (i % 8)) & 1u;
  }
  return ds;
}

void save_dataset(const std::filesystem::path& path, const SpikeDataset& data) {
  write_file_atomic(path, encode_dataset(data));
}

SpikeDataset load_dataset(const std::filesystem::path& path) {
  return decode_dataset(read_file(path));
}

SpikeDataset load_spike_csv(const std::filesystem::path& path,
                            std::vector<std::uint32_t> labels,
                            std::size_t timesteps, std::size_t channels,
                            std::size_t num_classes) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line) || line.rfind("sample,t,channel", 0) != 0) {
    throw DataError(path.string() + ": expected header 'sample,t,channel'");
  }
  SpikeDataset ds;
  ds.samples = labels.size();
  ds.timesteps = timesteps;
  ds.channels = channels;
  ds.num_classes = num_classes;
  ds.labels = std::move(labels);
  ds.spikes.assign(ds.samples * timesteps * channels, 0);
  ds.task = "csv";
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::istringstream row(line);
    long long s = -1, t = -1, c = -1;
    char comma1 = 0, comma2 = 0;
    row >> s >> comma1 >> t >> comma2 >> c;
    if (!row || comma1 != ',' || comma2 != ',' || s < 0 || t < 0 || c < 0 ||
        static_cast<std::size_t>(s) >= ds.samples ||
        static_cast<std::size_t>(t) >= timesteps ||
        static_cast<std::size_t>(c) >= channels) {
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": bad spike row '" + line + "'");
    }
    ds.spike(s, t, c) = 1;
  }
  ds.validate();
  return ds;
}

}  // namespace smoothsnn
