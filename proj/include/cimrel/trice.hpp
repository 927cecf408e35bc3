#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "cimrel/device.hpp"
#include "cimrel/json_io.hpp"
#include "cimrel/nn.hpp"

namespace cimrel {

/// censor_T = +infinity means no censoring (plain Gaussian injection).
inline constexpr double kNoCensoring = std::numeric_limits<double>::infinity();

struct TriceConfig {
  double sigma_train = 0.0;  // noise std in quantization steps
  double censor_T = 1.0;     // censor point in multiples of sigma_train
  TrainConfig train;
  QuantizationSpec quant;    // defines the step the noise is scaled by

  /// censor_T is written as null when infinite.
  Json to_json() const;
  static TriceConfig from_json(const Json& j);
};

/// out_i = min(g_i, censor_T * sigma), g_i ~ N(0, sigma^2), in step units.
ParamVector sample_censored_noise(std::size_t param_count, double sigma, double censor_T,
                                  std::uint64_t stream_seed);

/// Minibatch SGD where each batch's gradient is taken at W + noise with
/// fresh censored noise (scaled by the current per-tensor step) and the
/// update is applied to the clean W. Shuffling is identical to train()
/// with the same TrainConfig; sigma_train = 0 reproduces train() exactly.
TrainResult trice_train(const Mlp& initial, const Dataset& data, const TriceConfig& cfg);

struct NamedModel {
  std::string name;
  DeviceMapping device;
};

struct BenchmarkRow {
  std::string name;
  double clean_accuracy = 0.0;
  double mean_acc = 0.0;
  std::vector<double> kpp;              // one per k in the table's k_list
  std::vector<double> kpp_delta;        // kpp minus the first model's kpp
  double mean_delta = 0.0;
};

struct BenchmarkTable {
  std::vector<double> k_list;
  std::size_t n_runs = 0;
  std::uint64_t master_seed = 0;
  VariationModel vm;
  std::vector<BenchmarkRow> rows;
};

/// Paired draws: trial t uses the same step-unit sample z_t for every
/// model (each model scales it by its own steps). No write-verify.
BenchmarkTable kpp_benchmark(const std::vector<NamedModel>& models, const Dataset& data, const VariationModel& vm,
                             std::size_t n_runs, const std::vector<double>& k_list, std::uint64_t master_seed,
                             unsigned jobs = 1);

/// "model,k,kpp,mean_acc,n_runs,sigma,th_g"
std::string benchmark_csv(const BenchmarkTable& table);

}  // namespace cimrel
