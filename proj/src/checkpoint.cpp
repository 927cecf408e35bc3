#include "cimrel/checkpoint.hpp"

#include <string>

#include "cimrel/error.hpp"

namespace cimrel {

Json checkpoint_to_json(const Mlp& model, const Json& meta) {
  Json doc;
  doc["arch"] = model.dims();
  Json acts = Json::array();
  Json weights = Json::array();
  Json biases = Json::array();
  for (const auto& layer : model.layers()) {
    acts.push_back(std::string(to_string(layer.activation)));
    weights.push_back(layer.weight.data());
    biases.push_back(layer.bias.data());
  }
  doc["activations"] = std::move(acts);
  doc["weights"] = std::move(weights);
  doc["biases"] = std::move(biases);
  doc["meta"] = meta.is_null() ? Json::object() : meta;
  return doc;
}

Mlp checkpoint_from_json(const Json& doc) {
  try {
    const auto arch = doc.at("arch").get<std::vector<std::size_t>>();
    const auto& acts = doc.at("activations");
    const auto& weights = doc.at("weights");
    const auto& biases = doc.at("biases");
    if (arch.size() < 2) throw FormatError("checkpoint: arch needs at least two entries");
    const std::size_t n_layers = arch.size() - 1;
    if (acts.size() != n_layers || weights.size() != n_layers || biases.size() != n_layers) {
      throw FormatError("checkpoint: arch describes " + std::to_string(n_layers) +
                        " layers but activations/weights/biases disagree");
    }
    std::vector<DenseLayer> layers;
    for (std::size_t l = 0; l < n_layers; ++l) {
      layers.push_back(DenseLayer{Tensor({arch[l + 1], arch[l]}, weights[l].get<std::vector<double>>()),
                                  Tensor({arch[l + 1]}, biases[l].get<std::vector<double>>()),
                                  parse_activation(acts[l].get<std::string>())});
    }
    return Mlp(std::move(layers));
  } catch (const Json::exception& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Mlp& model, const Json& meta) {
  write_text_file(path, dump_json(checkpoint_to_json(model, meta)));
}

Mlp load_checkpoint(const std::filesystem::path& path) { return checkpoint_from_json(read_json_file(path)); }

void save_parameter_file(const std::filesystem::path& path, const Mlp& like, std::span<const double> params,
                         const Json& meta) {
  save_checkpoint(path, like.with_parameters(params), meta);
}

ParamVector load_parameter_file(const std::filesystem::path& path) { return load_checkpoint(path).flatten(); }

}  // namespace cimrel
