#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cimrel/json_io.hpp"
#include "cimrel/nn.hpp"
#include "cimrel/tensor.hpp"

namespace cimrel {

/// Symmetric uniform quantizer with a per-tensor max-abs range.
struct QuantizationSpec {
  int bits = 8;
};

struct QuantizedTensor {
  Tensor values;
  double step = 1.0;
};

/// step = max|w| / (2^(bits-1) - 1); all-zero tensors get step 1.
/// Levels are clamped to +-(2^(bits-1) - 1). bits must lie in [2, 16].
QuantizedTensor quantize(const Tensor& weights, QuantizationSpec spec);

/// Noise parameters in units of the quantization step of each tensor.
struct VariationModel {
  double sigma = 0.0;          // std of the write noise
  double th_g = 0.0;           // bound on unverified devices
  double th_wv = 0.0;          // bound on write-verified devices, <= th_g
  double verify_cost_V = 10.0; // write cycles for a verified device (plain write = 1)
  int bits = 8;

  /// Throws Error if any invariant is broken.
  void validate() const;

  Json to_json() const;
  static VariationModel from_json(const Json& j);
};

/// One flag per flattened parameter (biases included); true = write-verified.
class VerifiedMask {
 public:
  VerifiedMask() = default;
  explicit VerifiedMask(std::size_t n, bool value = false) : flags_(n, value) {}

  static VerifiedMask none(std::size_t n) { return VerifiedMask(n, false); }
  static VerifiedMask all(std::size_t n) { return VerifiedMask(n, true); }

  std::size_t size() const noexcept { return flags_.size(); }
  std::size_t count() const noexcept;
  bool operator[](std::size_t i) const { return flags_[i]; }
  void set(std::size_t i, bool value = true) { flags_.at(i) = value; }

  friend bool operator==(const VerifiedMask&, const VerifiedMask&) = default;

 private:
  std::vector<bool> flags_;
};

/// A model as programmed onto devices: quantized parameters plus the
/// quantization step that scales every parameter's noise.
struct DeviceMapping {
  Mlp model;
  ParamVector steps;  // one per flattened parameter
};

/// Quantizes every weight and bias tensor separately.
DeviceMapping map_to_device(const Mlp& model, QuantizationSpec spec);

/// Per-parameter quantization steps of `model` without altering its values.
ParamVector quantization_steps(const Mlp& model, QuantizationSpec spec);

/// Per-parameter noise bound in step units (th_wv where verified, else th_g).
std::vector<double> noise_bounds(const VariationModel& vm, const VerifiedMask& mask);

/// Truncated-Gaussian draws in step units: z_i ~ N(0, sigma^2) rejected
/// until |z_i| <= b_i. b_i = 0 or sigma = 0 gives exactly 0 and consumes
/// no randomness.
ParamVector sample_variation_units(std::size_t param_count, const VariationModel& vm, const VerifiedMask& mask,
                                   std::uint64_t stream_seed);

/// Absolute perturbation: steps[i] * z_i.
ParamVector sample_variation(std::span<const double> steps, const VariationModel& vm, const VerifiedMask& mask,
                             std::uint64_t stream_seed);

/// New model with parameters W + delta_w.
Mlp apply_noise(const Mlp& model, std::span<const double> delta_w);

/// Short hash of (vm, mask); identifies the noise configuration of a run.
std::string variation_digest(const VariationModel& vm, const VerifiedMask& mask);

}  // namespace cimrel
