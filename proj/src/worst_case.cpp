#include "cimrel/worst_case.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "cimrel/error.hpp"
#include "cimrel/eval_mc.hpp"
#include "cimrel/parallel.hpp"
#include "cimrel/rng.hpp"

namespace cimrel {

Json AttackConfig::to_json() const {
  return Json{{"steps", steps}, {"step_size", step_size}, {"restarts", restarts}, {"seed", seed},
              {"polish_passes", polish_passes}};
}

AttackConfig AttackConfig::from_json(const Json& j) {
  AttackConfig cfg;
  cfg.steps = j.value("steps", cfg.steps);
  cfg.step_size = j.value("step_size", cfg.step_size);
  cfg.restarts = j.value("restarts", cfg.restarts);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.polish_passes = j.value("polish_passes", cfg.polish_passes);
  if (cfg.steps < 1 || cfg.restarts < 1 || cfg.step_size < 0.0) {
    throw FormatError("attack config: steps and restarts must be >= 1, step_size >= 0");
  }
  return cfg;
}

ParamVector attack_bounds(const DeviceMapping& device, double th_g) {
  ParamVector b(device.steps.size());
  for (std::size_t i = 0; i < b.size(); ++i) b[i] = th_g * device.steps[i];
  return b;
}

namespace {

struct RestartOutcome {
  bool aborted = false;
  double accuracy = 2.0;
  ParamVector delta;
  std::vector<double> trace;
};

RestartOutcome run_restart(const DeviceMapping& device, const Dataset& data, const ParamVector& bounds,
                           double step_size_units, const AttackConfig& cfg, std::size_t restart) {
  Rng rng(stream_seed(cfg.seed, restart));
  const std::size_t n = bounds.size();
  const double n_samples = static_cast<double>(data.size());
  ParamVector delta(n);
  for (std::size_t i = 0; i < n; ++i) delta[i] = rng.uniform(-bounds[i], bounds[i]);

  RestartOutcome out;
  auto consider = [&](const ParamVector& candidate, double acc) {
    if (acc < out.accuracy) {
      out.accuracy = acc;
      out.delta = candidate;
    }
  };

  for (std::size_t t = 0; t < cfg.steps; ++t) {
    const LossGrad lg = loss_and_grads(apply_noise(device.model, delta), data);
    if (!std::isfinite(lg.loss) || !std::ranges::all_of(lg.grads, [](double g) { return std::isfinite(g); })) {
      out.aborted = true;
      return out;
    }
    out.trace.push_back(lg.loss);
    consider(delta, static_cast<double>(lg.correct) / n_samples);
    for (std::size_t i = 0; i < n; ++i) {
      const double g = lg.grads[i];
      const double dir = g > 0.0 ? 1.0 : (g < 0.0 ? -1.0 : 0.0);
      delta[i] = std::clamp(delta[i] + step_size_units * device.steps[i] * dir, -bounds[i], bounds[i]);
    }
  }
  consider(delta, accuracy(apply_noise(device.model, delta), data));

  ParamVector corner(n);
  for (std::size_t i = 0; i < n; ++i) corner[i] = delta[i] < 0.0 ? -bounds[i] : bounds[i];
  LossAccuracy here = evaluate(apply_noise(device.model, corner), data);
  consider(corner, here.accuracy);

  for (std::size_t pass = 0; pass < cfg.polish_passes; ++pass) {
    bool moved = false;
    for (std::size_t i = 0; i < n; ++i) {
      corner[i] = -corner[i];
      const LossAccuracy flipped = evaluate(apply_noise(device.model, corner), data);
      if (flipped.accuracy < here.accuracy || (flipped.accuracy == here.accuracy && flipped.loss > here.loss)) {
        here = flipped;
        moved = true;
      } else {
        corner[i] = -corner[i];
      }
    }
    if (!moved) break;
  }
  consider(corner, here.accuracy);
  return out;
}

}  // namespace

AttackResult pga_attack(const DeviceMapping& device, const Dataset& data, const VariationModel& vm,
                        const AttackConfig& cfg, unsigned jobs) {
  vm.validate();
  if (cfg.steps < 1 || cfg.restarts < 1) throw Error("pga_attack: steps and restarts must be >= 1");
  const std::size_t n = device.model.parameter_count();
  if (device.steps.size() != n) throw ShapeError("pga_attack: device steps do not match parameter count");

  AttackResult result;
  if (vm.th_g == 0.0) {
    result.delta_w.assign(n, 0.0);
    result.attacked_accuracy = accuracy(device.model, data);
    return result;
  }

  const ParamVector bounds = attack_bounds(device, vm.th_g);
  const double step_size = cfg.step_size > 0.0 ? cfg.step_size : vm.th_g / 10.0;
  std::vector<RestartOutcome> outcomes(cfg.restarts);
  parallel_for(cfg.restarts, jobs,
               [&](std::size_t r) { outcomes[r] = run_restart(device, data, bounds, step_size, cfg, r); });

  std::optional<std::size_t> best;
  for (std::size_t r = 0; r < outcomes.size(); ++r) {
    if (outcomes[r].aborted) {
      ++result.aborted_restarts;
      continue;
    }
    if (!best || outcomes[r].accuracy < outcomes[*best].accuracy) best = r;
  }
  if (!best) throw NumericError("pga_attack: all " + std::to_string(cfg.restarts) + " restarts hit non-finite gradients");

  auto& win = outcomes[*best];
  result.delta_w = std::move(win.delta);
  result.attacked_accuracy = win.accuracy;
  result.loss_trace = std::move(win.trace);
  result.restart_index = *best;
  return result;
}

CornerResult corner_oracle(const DeviceMapping& device, const Dataset& data, double th_g) {
  const std::size_t n = device.model.parameter_count();
  if (n > kCornerOracleMaxParams) {
    throw Error("corner_oracle: " + std::to_string(n) + " parameters exceeds the enumeration guard of " +
                std::to_string(kCornerOracleMaxParams) + "; use pga_attack instead");
  }
  if (!(th_g >= 0.0)) throw Error("corner_oracle: th_g must be >= 0");
  CornerResult best;
  if (th_g == 0.0) {
    best.delta_w.assign(n, 0.0);
    best.accuracy = accuracy(device.model, data);
    return best;
  }
  const ParamVector bounds = attack_bounds(device, th_g);
  ParamVector delta(n);
  const std::uint64_t patterns = std::uint64_t{1} << n;
  for (std::uint64_t m = 0; m < patterns; ++m) {
    for (std::size_t i = 0; i < n; ++i) delta[i] = ((m >> (n - 1 - i)) & 1U) ? bounds[i] : -bounds[i];
    const double acc = accuracy(apply_noise(device.model, delta), data);
    if (m == 0 || acc < best.accuracy) {
      best.accuracy = acc;
      best.delta_w = delta;
      best.pattern = m;
      if (acc == 0.0) break;
    }
  }
  return best;
}

GapReport mc_gap_report(const DeviceMapping& device, const Dataset& data, const VariationModel& vm,
                        const AttackConfig& cfg, std::size_t n_mc, std::uint64_t master_seed, unsigned jobs) {
  if (n_mc < 100) throw Error("mc_gap_report: n_mc must be >= 100");
  const std::size_t n = device.model.parameter_count();
  const VerifiedMask none = VerifiedMask::none(n);
  const AccuracyDistribution dist = run_monte_carlo(device, data, vm, none, n_mc, master_seed, jobs);
  const McSummary s = summarize(dist);

  GapReport report;
  report.clean_accuracy = accuracy(device.model, data);
  report.mc_mean = s.mean;
  report.mc_min = s.min;
  report.n_mc = n_mc;
  report.attack = pga_attack(device, data, vm, cfg, jobs);

  if (s.min < report.attack.attacked_accuracy) {
    const auto it = std::ranges::find_if(dist.trials, [&](const TrialOutcome& t) { return t.accuracy == s.min; });
    report.attack.delta_w = sample_variation(device.steps, vm, none, it->seed);
    report.attack.attacked_accuracy = s.min;
    report.attack.promoted_from_mc = true;
    report.attack.loss_trace.clear();
  }
  report.attack_accuracy = report.attack.attacked_accuracy;
  report.gap = report.mc_min - report.attack_accuracy;
  return report;
}

Json gap_json(const GapReport& report, const VariationModel& vm, const AttackConfig& cfg) {
  return Json{{"clean_accuracy", report.clean_accuracy},
              {"mc_mean", report.mc_mean},
              {"mc_min", report.mc_min},
              {"attack_acc", report.attack_accuracy},
              {"attacked_accuracy", report.attack_accuracy},
              {"gap", report.gap},
              {"n_mc", report.n_mc},
              {"th_g", vm.th_g},
              {"sigma", vm.sigma},
              {"steps", cfg.steps},
              {"restarts", cfg.restarts},
              {"restart_index", report.attack.restart_index},
              {"aborted_restarts", report.attack.aborted_restarts},
              {"promoted_from_mc", report.attack.promoted_from_mc}};
}

}  // namespace cimrel
