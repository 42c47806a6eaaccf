#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "smoothsnn/network.hpp"

namespace smoothsnn {

// On-disk checkpoint: a directory holding manifest.json and one raw
// little-endian float32 blob per parameter tensor. The manifest records the
// model spec, the float mode the engine ran in, and for every parameter its
// name, shape and blob file. Smoothing betas are stored as shape [1] blobs.

enum class FloatMode { Float32, Float64 };

std::string to_string(FloatMode mode);
FloatMode float_mode_from_string(const std::string& s);

nlohmann::json spec_to_json(const ModelSpec& spec);
/// Throws ConsistencyError on missing or malformed fields.
ModelSpec spec_from_json(const nlohmann::json& j);

template <typename Real>
struct Checkpoint {
  ModelSpec spec;
  ModelParams<Real> params;
  FloatMode float_mode = FloatMode::Float32;
};

template <typename Real>
void save_checkpoint(const std::filesystem::path& dir, const ModelSpec& spec,
                     const ModelParams<Real>& params, FloatMode mode);

template <typename Real>
Checkpoint<Real> load_checkpoint(const std::filesystem::path& dir);

}  // namespace smoothsnn
