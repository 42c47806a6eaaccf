#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "smoothsnn/analysis.hpp"
#include "smoothsnn/network.hpp"
#include "smoothsnn/training.hpp"

namespace smoothsnn {

/// Parameters of the synthetic temporal-pattern task used when no dataset
/// file is given. The pool is split into train and test by test_fraction.
struct SyntheticTask {
  std::size_t classes = 4;
  std::size_t channels = 40;
  std::size_t samples_per_class = 100;
  double jitter = 0.1;
  std::optional<std::uint64_t> seed;  // defaults to the run seed
  double test_fraction = 0.2;

  friend bool operator==(const SyntheticTask&, const SyntheticTask&) = default;
};

struct AnalysisConfig {
  std::size_t hist_bins = 64;
  RangeMode hist_range = RangeMode::Pooled;
  std::vector<double> sensitivity_tau{2.0};
  std::vector<double> sensitivity_alpha{0.25};
  std::size_t sensitivity_max_dt = 8;
  double ensemble_alpha_div = 1.0;
};

struct RunConfig {
  ModelSpec spec;                  // layer_sizes may be empty until data is known
  TrainConfig train;
  std::optional<std::string> data;       // SPK1 training pool
  std::optional<std::string> test_data;  // SPK1 test set
  std::optional<SyntheticTask> synthetic;
  std::string out = "out";
  AnalysisConfig analysis;
  std::size_t hidden_size = 64;    // used when layer_sizes is not given
  std::size_t eval_batch_size = 256;
};

/// Strict JSON parsing: unknown keys are rejected with the nearest known key
/// as a suggestion, syntax errors carry line and column, and range errors
/// name the key. Missing keys take their defaults.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

/// Resolved configuration, suitable for archiving next to run outputs and
/// for parsing back.
nlohmann::json config_to_json(const RunConfig& cfg);

std::vector<std::string> known_config_keys();

/// Edit distance used for key suggestions.
std::size_t levenshtein(std::string_view a, std::string_view b);

}  // namespace smoothsnn
