#include "smoothsnn/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <iterator>
#include <optional>

#include "CLI11.hpp"
#include "smoothsnn/analysis.hpp"
#include "smoothsnn/checkpoint.hpp"
#include "smoothsnn/config.hpp"
#include "smoothsnn/data.hpp"
#include "smoothsnn/errors.hpp"
#include "smoothsnn/io.hpp"
#include "smoothsnn/objective.hpp"
#include "smoothsnn/training.hpp"

namespace smoothsnn {

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool float64 = false;
  std::string checkpoint;
  bool sensitivity_only = false;
};

struct Datasets {
  SpikeDataset train;
  SpikeDataset test;  // may be empty
};

// Salt separating the train/test split of the synthetic pool from the
// generator itself.
constexpr std::uint64_t kTestSplitStream = 0x7e57;

RunConfig resolve_config(const Options& opt) {
  RunConfig cfg;
  if (opt.config_path.empty()) {
    cfg = parse_config("{}");
  } else if (opt.config_path == "-") {
    cfg = parse_config(std::string(std::istreambuf_iterator<char>(std::cin),
                                   std::istreambuf_iterator<char>()));
  } else {
    cfg = load_config(opt.config_path);
  }
  if (opt.seed) cfg.train.seed = *opt.seed;
  if (!opt.out.empty()) cfg.out = opt.out;
  if (opt.float64) cfg.train.float_mode = FloatMode::Float64;
  return cfg;
}

Datasets load_datasets(const RunConfig& cfg) {
  Datasets d;
  if (cfg.data) {
    d.train = load_dataset(*cfg.data);
    if (cfg.test_data) d.test = load_dataset(*cfg.test_data);
    return d;
  }
  if (!cfg.synthetic) {
    throw ConfigError("no data source: set 'data' to an SPK1 file or give a 'synthetic' task",
                      "data");
  }
  const SyntheticTask& st = *cfg.synthetic;
  const std::uint64_t seed = st.seed.value_or(cfg.train.seed);
  const SpikeDataset pool = gen_temporal_patterns(st.classes, st.channels, cfg.train.T,
                                                  st.samples_per_class, st.jitter, seed);
  auto split = split_dataset(pool, st.test_fraction, RngState(seed).split(kTestSplitStream).next_u64());
  d.train = std::move(split.first);
  d.test = std::move(split.second);
  return d;
}

ModelSpec resolve_spec(const RunConfig& cfg, const SpikeDataset& data) {
  ModelSpec spec = cfg.spec;
  if (spec.layer_sizes.empty()) {
    spec.layer_sizes = {data.channels, cfg.hidden_size, data.num_classes};
  }
  if (spec.input_size() != data.channels || spec.num_classes() != data.num_classes) {
    throw ConsistencyError("layer_sizes " + shape_to_string(spec.layer_sizes) +
                           " do not fit data with " + std::to_string(data.channels) +
                           " channels and " + std::to_string(data.num_classes) + " classes");
  }
  if (data.timesteps != cfg.train.T) {
    throw ConsistencyError("data has T=" + std::to_string(data.timesteps) +
                           " but config sets T=" + std::to_string(cfg.train.T));
  }
  return spec;
}

const SpikeDataset& eval_set(const Datasets& d) {
  return d.test.samples > 0 ? d.test : d.train;
}

fs::path checkpoint_dir(const RunConfig& cfg, const Options& opt) {
  return opt.checkpoint.empty() ? fs::path(cfg.out) / "checkpoint" : fs::path(opt.checkpoint);
}

template <typename Real>
Checkpoint<Real> load_matching_checkpoint(const fs::path& dir, const ModelSpec& spec) {
  Checkpoint<Real> ck = load_checkpoint<Real>(dir);
  if (!(ck.spec == spec)) {
    throw ConsistencyError("checkpoint " + dir.string() +
                           " was trained with a different model spec than the config");
  }
  return ck;
}

template <typename Real>
int do_train(const RunConfig& cfg, std::ostream& out) {
  const Datasets data = load_datasets(cfg);
  RunConfig resolved = cfg;
  resolved.spec = resolve_spec(cfg, data.train);
  const fs::path dir(cfg.out);
  fs::create_directories(dir);
  write_file_atomic(dir / "config.json", config_to_json(resolved).dump(2) + "\n");

  const TrainResult<Real> result = train<Real>(resolved.spec, data.train, cfg.train);
  write_metrics_csv(dir / "metrics.csv", result.history);
  save_checkpoint(dir / "checkpoint", resolved.spec, result.params, cfg.train.float_mode);

  const MetricsRecord& last = result.history.back();
  out << "trained " << result.history.size() << " epochs: train_acc=" << format_real(last.train_acc)
      << " val_acc=" << format_real(last.val_acc) << " -> " << dir.string() << "\n";
  return 0;
}

template <typename Real>
int do_eval(const RunConfig& cfg, const Options& opt, std::ostream& out) {
  const Datasets data = load_datasets(cfg);
  const ModelSpec spec = resolve_spec(cfg, data.train);
  const Checkpoint<Real> ck = load_matching_checkpoint<Real>(checkpoint_dir(cfg, opt), spec);
  const SpikeDataset& set = eval_set(data);
  const std::uint64_t init_seed = stream_seed(cfg.train.seed, SeedStream::Evaluation);

  const std::vector<double> acc = prefix_ensemble_eval(
      spec, ck.params, set, cfg.eval_batch_size, init_seed, eval_threads_from_env());

  // Spike counts use the same batching and membrane seeds as the evaluation.
  std::vector<std::vector<std::uint64_t>> spikes;
  const RngState root(init_seed);
  for (std::size_t lo = 0, b = 0; lo < set.samples; lo += cfg.eval_batch_size, ++b) {
    std::vector<std::size_t> idx(std::min(cfg.eval_batch_size, set.samples - lo));
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = lo + i;
    const auto trace = forward_unroll(spec, ck.params, set.batch_input<Real>(idx),
                                      ForwardOptions{root.split(b).next_u64()});
    const auto counts = count_spikes(trace);
    if (spikes.empty()) spikes.assign(counts.size(), std::vector<std::uint64_t>(counts[0].size(), 0));
    for (std::size_t l = 0; l < counts.size(); ++l)
      for (std::size_t t = 0; t < counts[l].size(); ++t) spikes[l][t] += counts[l][t];
  }

  const fs::path dir = fs::path(cfg.out) / "analysis";
  fs::create_directories(dir);
  write_file_atomic(dir / "prefix_accuracy.csv", prefix_accuracy_csv(acc));
  std::string csv = "layer,t,spikes\n";
  for (std::size_t l = 0; l < spikes.size(); ++l)
    for (std::size_t t = 0; t < spikes[l].size(); ++t) {
      csv += std::to_string(l) + "," + std::to_string(t) + "," +
             std::to_string(spikes[l][t]) + "\n";
    }
  write_file_atomic(dir / "spike_counts.csv", csv);

  out << "prefix accuracy on " << set.samples << " samples:";
  for (std::size_t k = 0; k < acc.size(); ++k) out << " k" << k + 1 << "=" << format_real(acc[k]);
  out << "\n";
  return 0;
}

std::vector<SensitivityQuery> sensitivity_grid(const AnalysisConfig& an) {
  std::vector<SensitivityQuery> grid;
  for (double tau : an.sensitivity_tau)
    for (double alpha : an.sensitivity_alpha)
      for (std::size_t dt = 1; dt <= an.sensitivity_max_dt; ++dt) {
        SensitivityQuery q;
        q.tau = tau;
        q.alpha = alpha;
        q.delta_t = dt;
        grid.push_back(q);
      }
  return grid;
}

template <typename Real>
int do_analyze(const RunConfig& cfg, const Options& opt, std::ostream& out) {
  const fs::path dir = fs::path(cfg.out) / "analysis";
  fs::create_directories(dir);
  const std::string sens = sensitivity_csv(sensitivity_grid(cfg.analysis));
  write_file_atomic(dir / "sensitivity.csv", sens);
  if (opt.sensitivity_only) {
    out << sens;
    return 0;
  }

  const Datasets data = load_datasets(cfg);
  const ModelSpec spec = resolve_spec(cfg, data.train);
  const Checkpoint<Real> ck = load_matching_checkpoint<Real>(checkpoint_dir(cfg, opt), spec);
  const SpikeDataset& set = eval_set(data);
  const std::uint64_t init_seed = stream_seed(cfg.train.seed, SeedStream::Evaluation);

  // Membrane statistics over the first evaluation batch.
  std::vector<std::size_t> idx(std::min(cfg.eval_batch_size, set.samples));
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const auto trace = forward_unroll(spec, ck.params, set.batch_input<Real>(idx),
                                    ForwardOptions{RngState(init_seed).split(0).next_u64()});
  std::vector<DistributionStats> stats;
  for (std::size_t l = 0; l < spec.num_weight_layers(); ++l) {
    if (!spec.is_spiking(l)) continue;
    stats.push_back(mp_stats(trace, l, cfg.analysis.hist_bins, cfg.analysis.hist_range,
                             spec.neuron.threshold));
  }
  write_file_atomic(dir / "mp_stats.csv", mp_stats_csv(stats));
  write_file_atomic(dir / "histograms.csv", histogram_csv(stats));
  write_file_atomic(dir / "similarity.csv", similarity_csv(stats));

  // Temporal subnetworks as ensemble members with equal weights.
  const Tensor<Real> logits = collect_logits(spec, ck.params, set, cfg.eval_batch_size,
                                             init_seed, eval_threads_from_env());
  const std::size_t n = logits.dim(0), T = logits.dim(1), C = logits.dim(2);
  Tensor<Real> members({T, n, C});
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t c = 0; c < C; ++c) members.at(t, s, c) = logits.at(s, t, c);
  const std::vector<double> weights(T, 1.0 / static_cast<double>(T));
  const EnsembleMetrics em = ensemble_metrics(members, std::span<const std::uint32_t>(set.labels),
                                              cfg.analysis.ensemble_alpha_div, weights);
  write_file_atomic(dir / "ensemble_metrics.csv",
                    "members,member_ce,diversity,aggregate,combined,alpha_div\n" +
                        std::to_string(em.members) + "," + format_real(em.member_ce) + "," +
                        format_real(em.diversity) + "," + format_real(em.aggregate) + "," +
                        format_real(em.combined) + "," + format_real(em.alpha_div) + "\n");
  write_file_atomic(dir / "logits.csv", logits_csv(logits));

  out << "analysis written to " << dir.string() << "\n";
  return 0;
}

template <typename Real>
int dispatch(const std::string& command, const RunConfig& cfg, const Options& opt,
             std::ostream& out) {
  if (command == "train") return do_train<Real>(cfg, out);
  if (command == "eval") return do_eval<Real>(cfg, opt, out);
  return do_analyze<Real>(cfg, opt, out);
}

std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return "config error";
  if (dynamic_cast<const IoError*>(&e)) return "I/O error";
  if (dynamic_cast<const ConsistencyError*>(&e)) return "consistency error";
  if (dynamic_cast<const FormatError*>(&e)) return "format error";
  if (dynamic_cast<const DataError*>(&e)) return "data error";
  if (dynamic_cast<const TrainingError*>(&e)) return "training error";
  if (dynamic_cast<const ParameterError*>(&e)) return "parameter error";
  if (dynamic_cast<const DimensionError*>(&e)) return "dimension error";
  if (dynamic_cast<const fs::filesystem_error*>(&e)) return "I/O error";
  return "error";
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spiking network training with membrane potential smoothing and "
               "temporally adjacent subnetwork guidance",
               "smoothsnn"};
  app.require_subcommand(1);
  Options opt;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "JSON run config ('-' reads stdin)");
    sub->add_option("--seed", opt.seed, "override the run seed");
    sub->add_option("--out", opt.out, "output directory");
    sub->add_flag("--float64", opt.float64, "run the engine in double precision");
  };
  CLI::App* train_cmd = app.add_subcommand("train", "train a model and write a checkpoint");
  CLI::App* eval_cmd = app.add_subcommand("eval", "prefix-ensemble accuracy and spike counts");
  CLI::App* analyze_cmd = app.add_subcommand("analyze", "diagnostics of a trained model");
  add_common(train_cmd);
  add_common(eval_cmd);
  add_common(analyze_cmd);
  for (CLI::App* sub : {eval_cmd, analyze_cmd}) {
    sub->add_option("--checkpoint", opt.checkpoint, "checkpoint directory (default OUT/checkpoint)");
  }
  analyze_cmd->add_flag("--sensitivity", opt.sensitivity_only,
                        "only write the temporal-gradient sensitivity table");

  std::vector<const char*> argv{"smoothsnn"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "smoothsnn: usage error: " << one_line(e.what()) << "\n";
    return 2;
  }

  std::string command;
  for (CLI::App* sub : {train_cmd, eval_cmd, analyze_cmd}) {
    if (sub->parsed()) command = sub->get_name();
  }
  try {
    const RunConfig cfg = resolve_config(opt);
    return cfg.train.float_mode == FloatMode::Float64 ? dispatch<double>(command, cfg, opt, out)
                                                      : dispatch<float>(command, cfg, opt, out);
  } catch (const std::exception& e) {
    err << "smoothsnn: " << error_kind(e) << ": " << one_line(e.what()) << "\n";
    return 1;
  }
}

}  // namespace smoothsnn
