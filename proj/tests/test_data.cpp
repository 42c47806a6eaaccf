#include <filesystem>
#include <fstream>
#include <numeric>

#include "doctest.h"
#include "smoothsnn/data.hpp"
#include "smoothsnn/errors.hpp"
#include "smoothsnn/io.hpp"
#include "smoothsnn/training.hpp"

using namespace smoothsnn;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("smoothsnn_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("noiseless patterns repeat the class template") {
  const auto d = gen_temporal_patterns(3, 10, 4, 5, 0.0, 7);
  CHECK_NOTHROW(d.validate());
  CHECK(d.samples == 15);
  const std::size_t stride = d.timesteps * d.channels;
  for (std::size_t s = 0; s < d.samples; ++s) {
    CHECK(d.labels[s] == s / 5);
    const std::size_t first = (s / 5) * 5;
    CHECK(std::equal(d.spikes.begin() + s * stride, d.spikes.begin() + (s + 1) * stride,
                     d.spikes.begin() + first * stride));
  }
  std::size_t ones = std::accumulate(d.spikes.begin(), d.spikes.end(), std::size_t{0});
  CHECK(ones > 0);
  CHECK(ones < d.spikes.size());
}

TEST_CASE("seeds change the templates and repeat exactly") {
  const auto a = gen_temporal_patterns(4, 40, 5, 3, 0.1, 1);
  const auto b = gen_temporal_patterns(4, 40, 5, 3, 0.1, 2);
  CHECK_FALSE(a.spikes == b.spikes);
  CHECK(a == gen_temporal_patterns(4, 40, 5, 3, 0.1, 1));
  CHECK_THROWS_AS(gen_temporal_patterns(0, 40, 5, 3, 0.1, 1), ParameterError);
  CHECK_THROWS_AS(gen_temporal_patterns(4, 40, 5, 3, 1.5, 1), ParameterError);
}

TEST_CASE("jitter flips bits at the requested rate") {
  const auto clean = gen_temporal_patterns(2, 50, 10, 1, 0.0, 9);
  const auto noisy = gen_temporal_patterns(2, 50, 10, 200, 0.2, 9);
  std::size_t flips = 0;
  const std::size_t stride = 10 * 50;
  for (std::size_t s = 0; s < noisy.samples; ++s) {
    const std::size_t cls = noisy.labels[s];
    for (std::size_t i = 0; i < stride; ++i)
      flips += noisy.spikes[s * stride + i] != clean.spikes[cls * stride + i];
  }
  const double rate = static_cast<double>(flips) / static_cast<double>(noisy.spikes.size());
  CHECK(rate > 0.19);
  CHECK(rate < 0.21);
}

TEST_CASE("fully jittered patterns carry no class information") {
  double acc = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto pool = gen_temporal_patterns(4, 20, 5, 100, 0.5, 40 + seed);
    const auto [train_set, test_set] = split_dataset(pool, 0.5, seed);
    ModelSpec spec;
    spec.layer_sizes = {20, 32, 4};
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.seed = seed;
    const auto res = train<float>(spec, train_set, cfg);
    acc += ensemble_accuracy(collect_logits(spec, res.params, test_set, 64, 0),
                             std::span<const std::uint32_t>(test_set.labels));
  }
  acc /= 5.0;
  CHECK(acc > 0.17);
  CHECK(acc < 0.33);
}

TEST_CASE("poisson_encode rates") {
  const auto values = Tensor<double>::matrix({{0.0, 1.0, 0.5}});
  const auto spikes = poisson_encode(values, 10000, 3);
  REQUIRE(spikes.shape() == Shape{1, 10000, 3});
  double zero = 0, one = 0, half = 0;
  for (std::size_t t = 0; t < 10000; ++t) {
    zero += spikes.at(0, t, 0);
    one += spikes.at(0, t, 1);
    half += spikes.at(0, t, 2);
  }
  CHECK(zero == 0.0);
  CHECK(one == 10000.0);
  CHECK(half / 10000.0 >= 0.49);
  CHECK(half / 10000.0 <= 0.51);
  CHECK(poisson_encode(values, 50, 3) == poisson_encode(values, 50, 3));
  CHECK_THROWS_AS(poisson_encode(Tensor<double>::matrix({{1.5}}), 5, 0), DataError);
  CHECK_THROWS_AS(poisson_encode(Tensor<double>::matrix({{-0.1}}), 5, 0), DataError);
}

TEST_CASE("split_dataset partitions the samples") {
  const auto d = gen_temporal_patterns(4, 8, 3, 25, 0.1, 5);
  const auto [a, b] = split_dataset(d, 0.2, 11);
  CHECK(a.samples == 80);
  CHECK(b.samples == 20);
  CHECK(a.samples + b.samples == d.samples);
  const auto [c, e] = split_dataset(d, 0.2, 11);
  CHECK(a == c);
  CHECK(b == e);
  const auto [all, none] = split_dataset(d, 0.0, 11);
  CHECK(all.samples == d.samples);
  CHECK(none.samples == 0);
}

TEST_CASE("batch_input lays out time-major tensors") {
  const auto d = gen_temporal_patterns(2, 6, 4, 3, 0.3, 2);
  const std::vector<std::size_t> idx{4, 1};
  const auto x = d.batch_input<float>(idx);
  REQUIRE(x.shape() == Shape{4, 2, 6});
  for (std::size_t t = 0; t < 4; ++t)
    for (std::size_t c = 0; c < 6; ++c) {
      CHECK(x.at(t, 0, c) == d.spike(4, t, c));
      CHECK(x.at(t, 1, c) == d.spike(1, t, c));
    }
  CHECK(d.batch_labels(idx) == std::vector<std::uint32_t>{1, 0});
}

TEST_CASE("SPK1 round trip") {
  const auto dir = temp_dir("spk1");
  const auto d = gen_temporal_patterns(3, 13, 7, 4, 0.2, 8);
  save_dataset(dir / "d.spk", d);
  CHECK(load_dataset(dir / "d.spk") == d);

  SpikeDataset empty;
  empty.timesteps = 3;
  empty.channels = 2;
  empty.num_classes = 2;
  CHECK(decode_dataset(encode_dataset(empty)) == empty);

  // Header 4 + 16, labels 12 * 4, spikes ceil(12 * 7 * 13 / 8).
  CHECK(encode_dataset(d).size() == 20 + 48 + (12 * 7 * 13 + 7) / 8);
  fs::remove_all(dir);
}

TEST_CASE("SPK1 decoding fails closed") {
  const auto bytes = encode_dataset(gen_temporal_patterns(2, 5, 3, 2, 0.1, 1));
  try {
    (void)decode_dataset(std::string_view(bytes).substr(0, bytes.size() - 1));
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.offset() == bytes.size() - 1);
  }
  std::string magic = bytes;
  magic[0] = 'X';
  CHECK_THROWS_AS(decode_dataset(magic), FormatError);
  CHECK_THROWS_AS(decode_dataset(bytes + "x"), FormatError);
  CHECK_THROWS_AS(decode_dataset(std::string_view(bytes).substr(0, 10)), FormatError);
  std::string label = bytes;
  label[20] = 9;
  CHECK_THROWS_AS(decode_dataset(label), FormatError);
  CHECK_THROWS_AS(load_dataset("/nonexistent/d.spk"), IoError);
}

TEST_CASE("spike CSV import") {
  const auto dir = temp_dir("csv");
  {
    std::ofstream f(dir / "s.csv");
    f << "sample,t,channel\n0,0,1\n1,2,0\n1,1,1\n";
  }
  const auto d = load_spike_csv(dir / "s.csv", {0, 1}, 3, 2, 2);
  CHECK(d.samples == 2);
  CHECK(d.spike(0, 0, 1) == 1);
  CHECK(d.spike(1, 2, 0) == 1);
  CHECK(d.spike(1, 1, 1) == 1);
  CHECK(std::accumulate(d.spikes.begin(), d.spikes.end(), 0) == 3);
  {
    std::ofstream f(dir / "bad.csv");
    f << "sample,t,channel\n0,5,1\n";
  }
  CHECK_THROWS_AS(load_spike_csv(dir / "bad.csv", {0}, 3, 2, 2), DataError);
  fs::remove_all(dir);
}

TEST_CASE("validate catches malformed datasets") {
  auto d = gen_temporal_patterns(2, 3, 2, 2, 0.1, 1);
  d.labels[0] = 5;
  CHECK_THROWS_AS(d.validate(), DataError);
  d = gen_temporal_patterns(2, 3, 2, 2, 0.1, 1);
  d.spikes[0] = 2;
  CHECK_THROWS_AS(d.validate(), DataError);
  d = gen_temporal_patterns(2, 3, 2, 2, 0.1, 1);
  d.spikes.pop_back();
  CHECK_THROWS_AS(d.validate(), DataError);
}
