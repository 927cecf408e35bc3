#include "cimrel/device.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cimrel/error.hpp"
#include "cimrel/rng.hpp"

namespace cimrel {

QuantizedTensor quantize(const Tensor& weights, QuantizationSpec spec) {
  if (spec.bits < 2 || spec.bits > 16) {
    throw Error("quantize: bits must lie in [2, 16], got " + std::to_string(spec.bits));
  }
  const double max_level = std::ldexp(1.0, spec.bits - 1) - 1.0;
  const double max_abs = weights.max_abs();
  QuantizedTensor q{weights, max_abs > 0.0 ? max_abs / max_level : 1.0};
  for (auto& v : q.values.data()) {
    const double level = std::clamp(std::round(v / q.step), -max_level, max_level);
    v = q.step * level;
  }
  return q;
}

void VariationModel::validate() const {
  auto finite = [](double v) { return std::isfinite(v); };
  if (!finite(sigma) || !finite(th_g) || !finite(th_wv) || !finite(verify_cost_V)) {
    throw Error("variation model: all parameters must be finite");
  }
  if (sigma < 0.0 || th_g < 0.0 || th_wv < 0.0) throw Error("variation model: sigma, th_g, th_wv must be >= 0");
  if (th_wv > th_g) throw Error("variation model: th_wv must not exceed th_g");
  if (verify_cost_V < 1.0) throw Error("variation model: verify_cost_V must be >= 1");
  if (bits < 2 || bits > 16) throw Error("variation model: bits must lie in [2, 16]");
}

Json VariationModel::to_json() const {
  return Json{{"sigma", sigma}, {"th_g", th_g}, {"th_wv", th_wv}, {"verify_cost_V", verify_cost_V}, {"bits", bits}};
}

VariationModel VariationModel::from_json(const Json& j) {
  VariationModel vm;
  vm.sigma = j.value("sigma", vm.sigma);
  vm.th_g = j.value("th_g", vm.th_g);
  vm.th_wv = j.value("th_wv", vm.th_wv);
  vm.verify_cost_V = j.value("verify_cost_V", vm.verify_cost_V);
  vm.bits = j.value("bits", vm.bits);
  vm.validate();
  return vm;
}

std::size_t VerifiedMask::count() const noexcept {
  return static_cast<std::size_t>(std::count(flags_.begin(), flags_.end(), true));
}

ParamVector quantization_steps(const Mlp& model, QuantizationSpec spec) {
  ParamVector steps;
  steps.reserve(model.parameter_count());
  for (const auto& layer : model.layers()) {
    const double sw = quantize(layer.weight, spec).step;
    steps.insert(steps.end(), layer.weight.size(), sw);
    const double sb = quantize(layer.bias, spec).step;
    steps.insert(steps.end(), layer.bias.size(), sb);
  }
  return steps;
}

DeviceMapping map_to_device(const Mlp& model, QuantizationSpec spec) {
  std::vector<DenseLayer> layers;
  for (const auto& layer : model.layers()) {
    layers.push_back(DenseLayer{quantize(layer.weight, spec).values, quantize(layer.bias, spec).values,
                                layer.activation});
  }
  return DeviceMapping{Mlp(std::move(layers)), quantization_steps(model, spec)};
}

std::vector<double> noise_bounds(const VariationModel& vm, const VerifiedMask& mask) {
  std::vector<double> b(mask.size());
  for (std::size_t i = 0; i < b.size(); ++i) b[i] = mask[i] ? vm.th_wv : vm.th_g;
  return b;
}

ParamVector sample_variation_units(std::size_t param_count, const VariationModel& vm, const VerifiedMask& mask,
                                   std::uint64_t seed) {
  if (mask.size() != param_count) {
    throw ShapeError("variation mask has " + std::to_string(mask.size()) + " flags for " +
                     std::to_string(param_count) + " parameters");
  }
  vm.validate();
  ParamVector z(param_count, 0.0);
  if (vm.sigma == 0.0) return z;
  Rng rng(seed);
  for (std::size_t i = 0; i < param_count; ++i) {
    const double bound = mask[i] ? vm.th_wv : vm.th_g;
    if (bound == 0.0) continue;
    double draw = vm.sigma * rng.normal();
    while (std::abs(draw) > bound) draw = vm.sigma * rng.normal();
    z[i] = draw;
  }
  return z;
}

ParamVector sample_variation(std::span<const double> steps, const VariationModel& vm, const VerifiedMask& mask,
                             std::uint64_t seed) {
  ParamVector dw = sample_variation_units(steps.size(), vm, mask, seed);
  for (std::size_t i = 0; i < dw.size(); ++i) dw[i] *= steps[i];
  return dw;
}

Mlp apply_noise(const Mlp& model, std::span<const double> delta_w) {
  if (delta_w.size() != model.parameter_count()) {
    throw ShapeError("apply_noise: delta has " + std::to_string(delta_w.size()) + " entries, model has " +
                     std::to_string(model.parameter_count()) + " parameters");
  }
  ParamVector params = model.flatten();
  for (std::size_t i = 0; i < params.size(); ++i) params[i] += delta_w[i];
  return model.with_parameters(params);
}

std::string variation_digest(const VariationModel& vm, const VerifiedMask& mask) {
  std::string text = dump_json(vm.to_json());
  text.reserve(text.size() + mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) text += mask[i] ? '1' : '0';
  return sha256_hex(text).substr(0, 16);
}

}  // namespace cimrel
