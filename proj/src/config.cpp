#include "smoothsnn/config.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "smoothsnn/errors.hpp"
#include "smoothsnn/io.hpp"

namespace smoothsnn {

using nlohmann::json;

namespace {

const std::vector<std::string> kTopKeys = {
    "layer_sizes",   "hidden_size",      "tau",           "threshold",
    "surrogate_width", "mp_init",        "mp_init_low",   "mp_init_high",
    "spike_fn",      "smoothing",        "readout",       "normalize",
    "alpha_gradient", "beta_init",       "T",             "epochs",
    "batch_size",    "lr0",              "lr_decay_every", "weight_decay",
    "momentum",      "seed",             "float64",       "val_fraction",
    "temperature",   "drop_probability", "gamma",         "guidance_mode",
    "detach_teacher", "data",            "test_data",     "synthetic",
    "out",           "eval_batch_size",  "hist_bins",     "hist_range",
    "sensitivity_tau", "sensitivity_alpha", "sensitivity_max_dt",
    "ensemble_alpha_div",
};

const std::vector<std::string> kSyntheticKeys = {
    "classes", "channels", "samples_per_class", "jitter", "seed", "test_fraction",
};

void reject_unknown(const json& obj, const std::vector<std::string>& known,
                    const std::string& prefix) {
  for (const auto& [key, value] : obj.items()) {
    if (std::find(known.begin(), known.end(), key) != known.end()) continue;
    std::string best;
    std::size_t best_d = static_cast<std::size_t>(-1);
    for (const auto& k : known) {
      const std::size_t d = levenshtein(key, k);
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    std::string msg = "unknown config key '" + prefix + key + "'";
    if (best_d <= std::max<std::size_t>(2, key.size() / 3)) {
      msg += "; did you mean '" + prefix + best + "'?";
    }
    throw ConfigError(msg, prefix + key);
  }
}

template <typename T>
void read(const json& obj, const std::string& key, T& target, const std::string& prefix = "") {
  if (!obj.contains(key)) return;
  if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
    const json& v = obj.at(key);
    if (!v.is_number_unsigned()) {
      throw ConfigError("config key '" + prefix + key +
                            "' must be a non-negative integer, got " + v.dump(),
                        prefix + key);
    }
  }
  try {
    target = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + prefix + key + "' has the wrong type: " +
                          obj.at(key).dump(),
                      prefix + key);
  }
}

void require(bool ok, const std::string& key, const std::string& msg) {
  if (!ok) throw ConfigError(msg, key);
}

template <typename Enum>
Enum read_enum(const json& obj, const std::string& key, Enum fallback,
               const std::map<std::string, Enum>& names) {
  if (!obj.contains(key)) return fallback;
  std::string s;
  read(obj, key, s);
  auto it = names.find(s);
  if (it == names.end()) {
    std::string choices;
    for (const auto& [name, value] : names) choices += (choices.empty() ? "" : "|") + name;
    throw ConfigError(key + " must be one of " + choices + ", got '" + s + "'", key);
  }
  return it->second;
}

template <typename Enum>
std::string enum_name(Enum v, const std::map<std::string, Enum>& names) {
  for (const auto& [name, value] : names) {
    if (value == v) return name;
  }
  return "?";
}

const std::map<std::string, SpikeFunction> kSpikeFns = {
    {"heaviside", SpikeFunction::Heaviside}, {"clipped_linear", SpikeFunction::ClippedLinear}};
const std::map<std::string, Readout> kReadouts = {{"membrane", Readout::Membrane},
                                                  {"spiking", Readout::Spiking}};
const std::map<std::string, AlphaGradient> kAlphaGrads = {
    {"truncated", AlphaGradient::Truncated}, {"full", AlphaGradient::Full}};
const std::map<std::string, GuidanceMode> kGuidanceModes = {{"kl", GuidanceMode::KL},
                                                           {"mse", GuidanceMode::MSE}};
const std::map<std::string, RangeMode> kRangeModes = {{"pooled", RangeMode::Pooled},
                                                      {"fixed", RangeMode::Fixed}};
const std::map<std::string, MpInit::Kind> kMpKinds = {{"zero", MpInit::Kind::Zero},
                                                      {"uniform", MpInit::Kind::UniformRandom}};

std::string line_column(std::string_view text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace

std::size_t levenshtein(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1,
                         prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::vector<std::string> known_config_keys() { return kTopKeys; }

RunConfig parse_config(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("config parse error at " + line_column(text, e.byte) + ": " +
                      e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(j, kTopKeys, "");

  RunConfig cfg;
  ModelSpec& spec = cfg.spec;
  NeuronConfig& n = spec.neuron;
  TrainConfig& tc = cfg.train;
  GuidanceConfig& g = tc.guidance;
  spec.smoothing_enabled = true;

  read(j, "layer_sizes", spec.layer_sizes);
  read(j, "hidden_size", cfg.hidden_size);
  read(j, "tau", n.tau);
  read(j, "threshold", n.threshold);
  read(j, "surrogate_width", n.surrogate_width);
  n.mp_init.kind = read_enum(j, "mp_init", MpInit::Kind::Zero, kMpKinds);
  n.mp_init.high = n.threshold;
  read(j, "mp_init_low", n.mp_init.low);
  read(j, "mp_init_high", n.mp_init.high);
  n.spike_fn = read_enum(j, "spike_fn", n.spike_fn, kSpikeFns);
  read(j, "smoothing", spec.smoothing_enabled);
  spec.readout = read_enum(j, "readout", spec.readout, kReadouts);
  read(j, "normalize", spec.normalize);
  spec.alpha_gradient = read_enum(j, "alpha_gradient", spec.alpha_gradient, kAlphaGrads);
  read(j, "beta_init", spec.beta_init);

  read(j, "T", tc.T);
  read(j, "epochs", tc.epochs);
  read(j, "batch_size", tc.batch_size);
  read(j, "lr0", tc.lr0);
  read(j, "lr_decay_every", tc.lr_decay_every);
  read(j, "weight_decay", tc.weight_decay);
  read(j, "momentum", tc.momentum);
  read(j, "seed", tc.seed);
  bool f64 = false;
  read(j, "float64", f64);
  tc.float_mode = f64 ? FloatMode::Float64 : FloatMode::Float32;
  read(j, "val_fraction", tc.val_fraction);
  read(j, "temperature", g.temperature);
  read(j, "drop_probability", g.drop_probability);
  read(j, "gamma", g.gamma);
  g.mode = read_enum(j, "guidance_mode", g.mode, kGuidanceModes);
  read(j, "detach_teacher", g.detach_teacher);

  if (j.contains("data")) {
    std::string s;
    read(j, "data", s);
    require(!s.empty(), "data", "config key 'data' must be a non-empty path");
    cfg.data = s;
  }
  if (j.contains("test_data")) {
    std::string s;
    read(j, "test_data", s);
    cfg.test_data = s;
  }
  if (j.contains("synthetic")) {
    const json& sj = j.at("synthetic");
    require(sj.is_object(), "synthetic", "config key 'synthetic' must be an object");
    reject_unknown(sj, kSyntheticKeys, "synthetic.");
    SyntheticTask st;
    read(sj, "classes", st.classes, "synthetic.");
    read(sj, "channels", st.channels, "synthetic.");
    read(sj, "samples_per_class", st.samples_per_class, "synthetic.");
    read(sj, "jitter", st.jitter, "synthetic.");
    if (sj.contains("seed")) {
      std::uint64_t s = 0;
      read(sj, "seed", s, "synthetic.");
      st.seed = s;
    }
    read(sj, "test_fraction", st.test_fraction, "synthetic.");
    require(st.classes >= 1, "synthetic.classes", "synthetic.classes must be >= 1");
    require(st.channels >= 1, "synthetic.channels", "synthetic.channels must be >= 1");
    require(st.samples_per_class >= 1, "synthetic.samples_per_class",
            "synthetic.samples_per_class must be >= 1");
    require(st.jitter >= 0.0 && st.jitter <= 1.0, "synthetic.jitter",
            "synthetic.jitter out of [0,1]");
    require(st.test_fraction >= 0.0 && st.test_fraction < 1.0, "synthetic.test_fraction",
            "synthetic.test_fraction out of [0,1)");
    cfg.synthetic = st;
  }
  require(!(cfg.data && cfg.synthetic), "data", "give either 'data' or 'synthetic', not both");
  read(j, "out", cfg.out);
  read(j, "eval_batch_size", cfg.eval_batch_size);

  AnalysisConfig& an = cfg.analysis;
  read(j, "hist_bins", an.hist_bins);
  an.hist_range = read_enum(j, "hist_range", an.hist_range, kRangeModes);
  read(j, "sensitivity_tau", an.sensitivity_tau);
  read(j, "sensitivity_alpha", an.sensitivity_alpha);
  read(j, "sensitivity_max_dt", an.sensitivity_max_dt);
  read(j, "ensemble_alpha_div", an.ensemble_alpha_div);

  require(n.tau > 1.0, "tau", "tau must be > 1");
  require(n.threshold > 0.0, "threshold", "threshold must be > 0");
  require(n.surrogate_width > 0.0, "surrogate_width", "surrogate_width must be > 0");
  require(n.mp_init.low <= n.mp_init.high, "mp_init_low", "mp_init_low must be <= mp_init_high");
  require(std::isfinite(spec.beta_init), "beta_init", "beta_init must be finite");
  require(spec.layer_sizes.empty() || spec.layer_sizes.size() >= 2, "layer_sizes",
          "layer_sizes needs at least 2 entries");
  for (std::size_t s : spec.layer_sizes) require(s >= 1, "layer_sizes", "layer sizes must be >= 1");
  require(cfg.hidden_size >= 1, "hidden_size", "hidden_size must be >= 1");
  require(tc.T >= 1, "T", "T must be >= 1");
  require(tc.epochs >= 1, "epochs", "epochs must be >= 1");
  require(tc.batch_size >= 1, "batch_size", "batch_size must be >= 1");
  require(tc.lr0 > 0.0, "lr0", "lr0 must be > 0");
  require(tc.lr_decay_every >= 1, "lr_decay_every", "lr_decay_every must be >= 1");
  require(tc.weight_decay >= 0.0, "weight_decay", "weight_decay must be >= 0");
  require(tc.momentum >= 0.0 && tc.momentum < 1.0, "momentum", "momentum out of [0,1)");
  require(tc.val_fraction >= 0.0 && tc.val_fraction < 1.0, "val_fraction",
          "val_fraction out of [0,1)");
  require(g.temperature > 0.0, "temperature", "temperature must be > 0");
  require(g.drop_probability >= 0.0 && g.drop_probability <= 1.0, "drop_probability",
          "drop_probability out of [0,1]");
  require(g.gamma >= 0.0, "gamma", "gamma must be >= 0");
  require(cfg.eval_batch_size >= 1, "eval_batch_size", "eval_batch_size must be >= 1");
  require(an.hist_bins >= 1, "hist_bins", "hist_bins must be >= 1");
  require(an.sensitivity_max_dt >= 1, "sensitivity_max_dt", "sensitivity_max_dt must be >= 1");
  for (double t : an.sensitivity_tau) require(t > 1.0, "sensitivity_tau", "sensitivity_tau entries must be > 1");
  for (double a : an.sensitivity_alpha) {
    require(a >= 0.0 && a <= 1.0, "sensitivity_alpha", "sensitivity_alpha entries out of [0,1]");
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_file(path));
}

json config_to_json(const RunConfig& cfg) {
  const ModelSpec& spec = cfg.spec;
  const NeuronConfig& n = spec.neuron;
  const TrainConfig& tc = cfg.train;
  const GuidanceConfig& g = tc.guidance;
  json j{
      {"layer_sizes", spec.layer_sizes},
      {"hidden_size", cfg.hidden_size},
      {"tau", n.tau},
      {"threshold", n.threshold},
      {"surrogate_width", n.surrogate_width},
      {"mp_init", enum_name(n.mp_init.kind, kMpKinds)},
      {"mp_init_low", n.mp_init.low},
      {"mp_init_high", n.mp_init.high},
      {"spike_fn", enum_name(n.spike_fn, kSpikeFns)},
      {"smoothing", spec.smoothing_enabled},
      {"readout", enum_name(spec.readout, kReadouts)},
      {"normalize", spec.normalize},
      {"alpha_gradient", enum_name(spec.alpha_gradient, kAlphaGrads)},
      {"beta_init", spec.beta_init},
      {"T", tc.T},
      {"epochs", tc.epochs},
      {"batch_size", tc.batch_size},
      {"lr0", tc.lr0},
      {"lr_decay_every", tc.lr_decay_every},
      {"weight_decay", tc.weight_decay},
      {"momentum", tc.momentum},
      {"seed", tc.seed},
      {"float64", tc.float_mode == FloatMode::Float64},
      {"val_fraction", tc.val_fraction},
      {"temperature", g.temperature},
      {"drop_probability", g.drop_probability},
      {"gamma", g.gamma},
      {"guidance_mode", enum_name(g.mode, kGuidanceModes)},
      {"detach_teacher", g.detach_teacher},
      {"out", cfg.out},
      {"eval_batch_size", cfg.eval_batch_size},
      {"hist_bins", cfg.analysis.hist_bins},
      {"hist_range", enum_name(cfg.analysis.hist_range, kRangeModes)},
      {"sensitivity_tau", cfg.analysis.sensitivity_tau},
      {"sensitivity_alpha", cfg.analysis.sensitivity_alpha},
      {"sensitivity_max_dt", cfg.analysis.sensitivity_max_dt},
      {"ensemble_alpha_div", cfg.analysis.ensemble_alpha_div},
  };
  if (cfg.data) j["data"] = *cfg.data;
  if (cfg.test_data) j["test_data"] = *cfg.test_data;
  if (cfg.synthetic) {
    const SyntheticTask& st = *cfg.synthetic;
    json sj{{"classes", st.classes},
            {"channels", st.channels},
            {"samples_per_class", st.samples_per_class},
            {"jitter", st.jitter},
            {"test_fraction", st.test_fraction}};
    if (st.seed) sj["seed"] = *st.seed;
    j["synthetic"] = sj;
  }
  return j;
}

}  // namespace smoothsnn
