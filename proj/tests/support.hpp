#pragma once
// Shared fixtures and reference math for the unit and acceptance suites.
// The reference routines below are written from scratch on purpose: they
// never call the library's forward/backward code, so they can serve as
// oracles for it.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "cimrel/datasets.hpp"
#include "cimrel/device.hpp"
#include "cimrel/nn.hpp"

namespace cimrel::testing {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }
inline double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

/// Std of N(0, sigma^2) truncated to [-b, b].
inline double truncated_normal_std(double sigma, double b) {
  const double a = b / sigma;
  const double mass = 2.0 * normal_cdf(a) - 1.0;
  return sigma * std::sqrt(1.0 - 2.0 * a * normal_pdf(a) / mass);
}

/// E[min(g, T sigma)], g ~ N(0, sigma^2).
inline double censored_normal_mean(double sigma, double T) {
  return sigma * (T * (1.0 - normal_cdf(T)) - normal_pdf(T));
}

/// Plain-loop forward pass over a flat parameter vector in the documented
/// layout (per layer: row-major weights, then bias).
inline std::vector<double> reference_logits(const std::vector<std::size_t>& dims, const std::vector<bool>& relu,
                                            std::span<const double> params, std::span<const double> x) {
  std::vector<double> a(x.begin(), x.end());
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const std::size_t in = dims[l], out = dims[l + 1];
    std::vector<double> z(out);
    for (std::size_t r = 0; r < out; ++r) {
      double s = params[off + in * out + r];
      for (std::size_t c = 0; c < in; ++c) s += params[off + r * in + c] * a[c];
      z[r] = relu[l] ? std::max(0.0, s) : s;
    }
    off += in * out + out;
    a = std::move(z);
  }
  return a;
}

inline double reference_loss(const std::vector<std::size_t>& dims, const std::vector<bool>& relu,
                             std::span<const double> params, const Dataset& data) {
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto z = reference_logits(dims, relu, params, data.inputs.row(i));
    double m = z[0];
    for (double v : z) m = std::max(m, v);
    double s = 0.0;
    for (double v : z) s += std::exp(v - m);
    total += std::log(s) + m - z[static_cast<std::size_t>(data.targets[i])];
  }
  return total / static_cast<double>(data.size());
}

inline std::vector<bool> relu_flags(const Mlp& m) {
  std::vector<bool> r;
  for (const auto& layer : m.layers()) r.push_back(layer.activation == Activation::relu);
  return r;
}

/// Desk-scale blobs fixture: 400 samples, 2-10-6-2 relu net, 4-bit mapping.
struct BlobsFixture {
  Dataset data;
  Mlp trained;
  DeviceMapping device;
};

inline TrainConfig blobs_train_config(std::uint64_t seed = 7) {
  return TrainConfig{.epochs = 50, .lr = 0.02, .momentum = 0.9, .batch_size = 32, .seed = seed};
}

inline const std::vector<std::size_t>& blobs_dims() {
  static const std::vector<std::size_t> d{2, 10, 6, 2};
  return d;
}

inline BlobsFixture make_blobs_fixture() {
  Dataset data = gen_dataset("blobs", 400, 0.5, 7);
  Mlp trained = train(Mlp::initialize(blobs_dims(), 7), data, blobs_train_config()).model;
  DeviceMapping device = map_to_device(trained, QuantizationSpec{4});
  return BlobsFixture{std::move(data), std::move(trained), std::move(device)};
}

inline const BlobsFixture& blobs_fixture() {
  static const BlobsFixture f = make_blobs_fixture();
  return f;
}

/// sigma 1.5 steps, th_g = 3 sigma, no verified bound, V = 10.
inline VariationModel blobs_variation() {
  return VariationModel{.sigma = 1.5, .th_g = 4.5, .th_wv = 0.0, .verify_cost_V = 10.0, .bits = 4};
}

/// Twelve-parameter 2-2-2 nets for the exhaustive corner search.
struct TinyFixture {
  Dataset data;
  DeviceMapping device;
};

inline TinyFixture make_tiny_fixture(std::uint64_t seed) {
  Dataset data = gen_dataset("blobs", 60, 0.5, 50 + seed);
  const std::vector<std::size_t> dims{2, 2, 2};
  const TrainConfig tc{.epochs = 30, .lr = 0.05, .momentum = 0.9, .batch_size = 10, .seed = seed};
  Mlp m = train(Mlp::initialize(dims, seed), data, tc).model;
  return TinyFixture{std::move(data), map_to_device(m, QuantizationSpec{4})};
}

}  // namespace cimrel::testing
