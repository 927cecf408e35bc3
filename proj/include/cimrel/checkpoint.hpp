#pragma once

#include <filesystem>

#include "cimrel/json_io.hpp"
#include "cimrel/nn.hpp"

namespace cimrel {

/// {"arch", "activations", "weights", "biases", "meta"}; weights are flat
/// row-major per layer.
Json checkpoint_to_json(const Mlp& model, const Json& meta);
Mlp checkpoint_from_json(const Json& doc);

void save_checkpoint(const std::filesystem::path& path, const Mlp& model, const Json& meta);
Mlp load_checkpoint(const std::filesystem::path& path);

/// Parameter vector stored with the layout of `like` (used for delta_w files).
void save_parameter_file(const std::filesystem::path& path, const Mlp& like, std::span<const double> params,
                         const Json& meta);
ParamVector load_parameter_file(const std::filesystem::path& path);

}  // namespace cimrel
