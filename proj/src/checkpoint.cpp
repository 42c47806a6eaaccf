#include "smoothsnn/checkpoint.hpp"

#include <map>

#include "smoothsnn/errors.hpp"
#include "smoothsnn/io.hpp"

namespace smoothsnn {

using nlohmann::json;

namespace {

constexpr const char* kManifest = "manifest.json";
constexpr const char* kFormatTag = "smoothsnn-checkpoint";

template <typename T>
T require(const json& j, const char* key) {
  if (!j.contains(key)) {
    throw ConsistencyError(std::string("checkpoint spec is missing '") + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConsistencyError(std::string("checkpoint field '") + key + "': " + e.what());
  }
}

std::string blob_bytes(const std::vector<float>& values) {
  std::string out;
  out.reserve(values.size() * 4);
  for (float v : values) put_f32_le(out, v);
  return out;
}

}  // namespace

std::string to_string(FloatMode mode) {
  return mode == FloatMode::Float64 ? "float64" : "float32";
}

FloatMode float_mode_from_string(const std::string& s) {
  if (s == "float32") return FloatMode::Float32;
  if (s == "float64") return FloatMode::Float64;
  throw ConsistencyError("unknown float mode '" + s + "'");
}

json spec_to_json(const ModelSpec& spec) {
  json mp;
  if (spec.neuron.mp_init.kind == MpInit::Kind::Zero) {
    mp = {{"kind", "zero"}};
  } else {
    mp = {{"kind", "uniform"},
          {"low", spec.neuron.mp_init.low},
          {"high", spec.neuron.mp_init.high}};
  }
  return json{
      {"layer_sizes", spec.layer_sizes},
      {"tau", spec.neuron.tau},
      {"threshold", spec.neuron.threshold},
      {"surrogate_width", spec.neuron.surrogate_width},
      {"mp_init", mp},
      {"spike_fn", spec.neuron.spike_fn == SpikeFunction::Heaviside ? "heaviside"
                                                                     : "clipped_linear"},
      {"smoothing", spec.smoothing_enabled},
      {"readout", spec.readout == Readout::Membrane ? "membrane" : "spiking"},
      {"normalize", spec.normalize},
      {"alpha_gradient",
       spec.alpha_gradient == AlphaGradient::Truncated ? "truncated" : "full"},
      {"beta_init", spec.beta_init},
  };
}

ModelSpec spec_from_json(const json& j) {
  ModelSpec spec;
  spec.layer_sizes = require<std::vector<std::size_t>>(j, "layer_sizes");
  spec.neuron.tau = require<double>(j, "tau");
  spec.neuron.threshold = require<double>(j, "threshold");
  spec.neuron.surrogate_width = require<double>(j, "surrogate_width");
  const json mp = require<json>(j, "mp_init");
  const auto kind = require<std::string>(mp, "kind");
  if (kind == "uniform") {
    spec.neuron.mp_init = MpInit::uniform(require<double>(mp, "low"),
                                          require<double>(mp, "high"));
  } else if (kind != "zero") {
    throw ConsistencyError("unknown mp_init kind '" + kind + "'");
  }
  const auto spike_fn = require<std::string>(j, "spike_fn");
  if (spike_fn == "clipped_linear") {
    spec.neuron.spike_fn = SpikeFunction::ClippedLinear;
  } else if (spike_fn != "heaviside") {
    throw ConsistencyError("unknown spike_fn '" + spike_fn + "'");
  }
  spec.smoothing_enabled = require<bool>(j, "smoothing");
  const auto readout = require<std::string>(j, "readout");
  if (readout == "spiking") {
    spec.readout = Readout::Spiking;
  } else if (readout != "membrane") {
    throw ConsistencyError("unknown readout '" + readout + "'");
  }
  spec.normalize = require<bool>(j, "normalize");
  const auto ag = require<std::string>(j, "alpha_gradient");
  if (ag == "full") {
    spec.alpha_gradient = AlphaGradient::Full;
  } else if (ag != "truncated") {
    throw ConsistencyError("unknown alpha_gradient '" + ag + "'");
  }
  spec.beta_init = require<double>(j, "beta_init");
  try {
    spec.validate();
  } catch (const ParameterError& e) {
    throw ConsistencyError(std::string("checkpoint spec invalid: ") + e.what());
  }
  return spec;
}

template <typename Real>
void save_checkpoint(const std::filesystem::path& dir, const ModelSpec& spec,
                     const ModelParams<Real>& params, FloatMode mode) {
  params.validate(spec);
  std::filesystem::create_directories(dir);
  json entries = json::array();
  auto emit = [&](const std::string& name, const Shape& shape,
                  const std::vector<float>& values) {
    const std::string file = name + ".bin";
    write_file_atomic(dir / file, blob_bytes(values));
    entries.push_back({{"name", name}, {"shape", shape}, {"file", file},
                       {"dtype", "float32le"}});
  };
  auto as_float = [](const Tensor<Real>& t) {
    return std::vector<float>(t.data().begin(), t.data().end());
  };
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    const std::string prefix = "layer" + std::to_string(l);
    emit(prefix + ".weight", params.weights[l].shape(), as_float(params.weights[l]));
    if (l < params.betas.size()) {
      emit(prefix + ".beta", Shape{1}, {static_cast<float>(params.betas[l])});
    }
    if (l < params.norm_scale.size()) {
      emit(prefix + ".norm_scale", params.norm_scale[l].shape(),
           as_float(params.norm_scale[l]));
      emit(prefix + ".norm_shift", params.norm_shift[l].shape(),
           as_float(params.norm_shift[l]));
    }
  }
  json manifest{{"format", kFormatTag},
                {"version", 1},
                {"float_mode", to_string(mode)},
                {"spec", spec_to_json(spec)},
                {"parameters", entries}};
  write_file_atomic(dir / kManifest, manifest.dump(2) + "\n");
}

template <typename Real>
Checkpoint<Real> load_checkpoint(const std::filesystem::path& dir) {
  const std::filesystem::path manifest_path = dir / kManifest;
  if (!std::filesystem::exists(manifest_path)) {
    throw IoError("no checkpoint manifest at " + manifest_path.string());
  }
  json manifest;
  try {
    manifest = json::parse(read_file(manifest_path));
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("checkpoint manifest is not valid JSON: ") + e.what(),
                      e.byte);
  }
  if (manifest.value("format", std::string{}) != kFormatTag) {
    throw ConsistencyError("not a smoothsnn checkpoint: " + manifest_path.string());
  }
  Checkpoint<Real> ck;
  ck.spec = spec_from_json(require<json>(manifest, "spec"));
  ck.float_mode = float_mode_from_string(require<std::string>(manifest, "float_mode"));

  std::map<std::string, Tensor<Real>> tensors;
  for (const auto& entry : require<json>(manifest, "parameters")) {
    const auto name = require<std::string>(entry, "name");
    const auto shape = require<Shape>(entry, "shape");
    const auto file = require<std::string>(entry, "file");
    const std::string bytes = read_file(dir / file);
    const std::size_t count = shape_volume(shape);
    if (bytes.size() != 4 * count) {
      throw FormatError("parameter blob " + file + " holds " +
                            std::to_string(bytes.size()) + " bytes, expected " +
                            std::to_string(4 * count),
                        std::min(bytes.size(), 4 * count));
    }
    std::vector<Real> values(count);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    for (std::size_t i = 0; i < count; ++i) values[i] = Real(get_f32_le(p + 4 * i));
    tensors.emplace(name, Tensor<Real>(shape, std::move(values)));
  }
  auto take = [&](const std::string& name) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw ConsistencyError("checkpoint lacks parameter " + name);
    return it->second;
  };
  const ModelSpec& spec = ck.spec;
  for (std::size_t l = 0; l < spec.num_weight_layers(); ++l) {
    const std::string prefix = "layer" + std::to_string(l);
    ck.params.weights.push_back(take(prefix + ".weight"));
    if (spec.is_spiking(l) && spec.smoothing_enabled) {
      ck.params.betas.push_back(take(prefix + ".beta")[0]);
    }
    if (spec.is_spiking(l) && spec.normalize) {
      ck.params.norm_scale.push_back(take(prefix + ".norm_scale"));
      ck.params.norm_shift.push_back(take(prefix + ".norm_shift"));
    }
  }
  ck.params.validate(spec);
  return ck;
}

template void save_checkpoint(const std::filesystem::path&, const ModelSpec&,
                              const ModelParams<float>&, FloatMode);
template void save_checkpoint(const std::filesystem::path&, const ModelSpec&,
                              const ModelParams<double>&, FloatMode);
template Checkpoint<float> load_checkpoint(const std::filesystem::path&);
template Checkpoint<double> load_checkpoint(const std::filesystem::path&);

}  // namespace smoothsnn
