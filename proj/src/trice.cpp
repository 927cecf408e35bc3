#include "cimrel/trice.hpp"

#include <algorithm>
#include <cmath>

#include "cimrel/error.hpp"
#include "cimrel/eval_mc.hpp"
#include "cimrel/parallel.hpp"
#include "cimrel/rng.hpp"

namespace cimrel {

namespace {

// Stream index offset keeping noise streams apart from the shuffle seed.
constexpr std::uint64_t kNoiseStream = 0x7472696365ULL;

}  // namespace

Json TriceConfig::to_json() const {
  return Json{{"sigma_train", sigma_train},
              {"censor_T", std::isfinite(censor_T) ? Json(censor_T) : Json(nullptr)},
              {"epochs", train.epochs},
              {"lr", train.lr},
              {"momentum", train.momentum},
              {"batch_size", train.batch_size},
              {"seed", train.seed},
              {"bits", quant.bits}};
}

TriceConfig TriceConfig::from_json(const Json& j) {
  TriceConfig cfg;
  cfg.sigma_train = j.value("sigma_train", cfg.sigma_train);
  if (j.contains("censor_T")) {
    const auto& t = j.at("censor_T");
    if (t.is_null() || (t.is_string() && (t == "inf" || t == "none"))) {
      cfg.censor_T = kNoCensoring;
    } else {
      cfg.censor_T = t.get<double>();
    }
  }
  cfg.train.epochs = j.value("epochs", cfg.train.epochs);
  cfg.train.lr = j.value("lr", cfg.train.lr);
  cfg.train.momentum = j.value("momentum", cfg.train.momentum);
  cfg.train.batch_size = j.value("batch_size", cfg.train.batch_size);
  cfg.train.seed = j.value("seed", cfg.train.seed);
  cfg.quant.bits = j.value("bits", cfg.quant.bits);
  if (!(cfg.sigma_train >= 0.0) || !std::isfinite(cfg.sigma_train)) throw FormatError("trice: sigma_train must be >= 0");
  if (cfg.train.epochs < 1) throw FormatError("trice: epochs must be >= 1");
  return cfg;
}

ParamVector sample_censored_noise(std::size_t param_count, double sigma, double censor_T, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw Error("sample_censored_noise: sigma must be >= 0");
  ParamVector out(param_count, 0.0);
  if (sigma == 0.0) return out;
  const double cap = censor_T * sigma;
  Rng rng(seed);
  for (auto& v : out) v = std::min(sigma * rng.normal(), cap);
  return out;
}

TrainResult trice_train(const Mlp& initial, const Dataset& data, const TriceConfig& cfg) {
  if (!(cfg.sigma_train >= 0.0)) throw Error("trice_train: sigma_train must be >= 0");
  if (cfg.sigma_train == 0.0) return train(initial, data, cfg.train);

  const std::uint64_t noise_master = stream_seed(cfg.train.seed, kNoiseStream);
  GradientPointHook hook = [&](std::span<double> params, std::size_t step) {
    const Mlp current = initial.with_parameters(params);
    const ParamVector steps = quantization_steps(current, cfg.quant);
    const ParamVector noise =
        sample_censored_noise(params.size(), cfg.sigma_train, cfg.censor_T, stream_seed(noise_master, step));
    for (std::size_t i = 0; i < params.size(); ++i) params[i] += steps[i] * noise[i];
  };
  return train(initial, data, cfg.train, hook);
}

BenchmarkTable kpp_benchmark(const std::vector<NamedModel>& models, const Dataset& data, const VariationModel& vm,
                             std::size_t n_runs, const std::vector<double>& k_list, std::uint64_t master_seed,
                             unsigned jobs) {
  if (models.empty()) throw Error("kpp_benchmark: no models");
  if (n_runs < 1) throw Error("kpp_benchmark: n_runs must be >= 1");
  vm.validate();
  const std::size_t p = models.front().device.model.parameter_count();
  for (const auto& m : models) {
    if (m.device.model.parameter_count() != p || m.device.steps.size() != p) {
      throw ShapeError("kpp_benchmark: model '" + m.name + "' has a different parameter layout");
    }
  }

  const VerifiedMask none = VerifiedMask::none(p);
  // acc[m][t]
  std::vector<std::vector<double>> acc(models.size(), std::vector<double>(n_runs));
  parallel_for(n_runs, jobs, [&](std::size_t t) {
    const ParamVector z = sample_variation_units(p, vm, none, stream_seed(master_seed, t));
    ParamVector dw(p);
    for (std::size_t m = 0; m < models.size(); ++m) {
      const auto& dev = models[m].device;
      for (std::size_t i = 0; i < p; ++i) dw[i] = dev.steps[i] * z[i];
      acc[m][t] = accuracy(apply_noise(dev.model, dw), data);
    }
  });

  BenchmarkTable table{k_list, n_runs, master_seed, vm, {}};
  for (std::size_t m = 0; m < models.size(); ++m) {
    const auto dist = AccuracyDistribution::from_values(acc[m]);
    BenchmarkRow row;
    row.name = models[m].name;
    row.clean_accuracy = accuracy(models[m].device.model, data);
    row.mean_acc = summarize(dist).mean;
    for (double k : k_list) row.kpp.push_back(kpp(dist, k).value);
    table.rows.push_back(std::move(row));
  }
  for (auto& row : table.rows) {
    row.mean_delta = row.mean_acc - table.rows.front().mean_acc;
    for (std::size_t i = 0; i < row.kpp.size(); ++i) row.kpp_delta.push_back(row.kpp[i] - table.rows.front().kpp[i]);
  }
  return table;
}

std::string benchmark_csv(const BenchmarkTable& table) {
  std::string out = "model,k,kpp,mean_acc,n_runs,sigma,th_g\n";
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < table.k_list.size(); ++i) {
      out += row.name + "," + format_double(table.k_list[i]) + "," + format_double(row.kpp[i]) + "," +
             format_double(row.mean_acc) + "," + std::to_string(table.n_runs) + "," + format_double(table.vm.sigma) +
             "," + format_double(table.vm.th_g) + "\n";
    }
  }
  return out;
}

}  // namespace cimrel
