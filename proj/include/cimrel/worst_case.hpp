#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "cimrel/device.hpp"
#include "cimrel/json_io.hpp"
#include "cimrel/nn.hpp"

namespace cimrel {

/// Projected sign-gradient ascent on the cross-entropy of the perturbed
/// model, inside the box |delta_i| <= th_g * step_i.
struct AttackConfig {
  std::size_t steps = 200;
  double step_size = 0.0;  // in quantization steps; 0 selects th_g / 10
  std::size_t restarts = 8;
  std::uint64_t seed = 0;
  std::size_t polish_passes = 10;  // corner sign-flip sweeps after ascent; 0 disables

  Json to_json() const;
  static AttackConfig from_json(const Json& j);
};

struct AttackResult {
  ParamVector delta_w;
  double attacked_accuracy = 1.0;
  std::vector<double> loss_trace;  // loss at each ascent step of the winning restart
  std::size_t restart_index = 0;
  std::size_t aborted_restarts = 0;
  bool promoted_from_mc = false;
};

/// Per-parameter box half-widths th_g * step_i.
ParamVector attack_bounds(const DeviceMapping& device, double th_g);

/// Each restart starts uniformly inside the box (seeded from cfg.seed and
/// the restart index) and keeps its lowest-accuracy iterate, including the
/// box corner that matches the sign of the final iterate. That corner is
/// then polished by sweeping single sign flips, accepting a flip when it
/// lowers accuracy, or keeps accuracy and raises the loss. Ties go to the
/// earliest candidate and then the lowest restart index.
AttackResult pga_attack(const DeviceMapping& device, const Dataset& data, const VariationModel& vm,
                        const AttackConfig& cfg, unsigned jobs = 1);

struct CornerResult {
  ParamVector delta_w;
  double accuracy = 1.0;
  std::uint64_t pattern = 0;  // bit (n-1-i) set = parameter i at +bound
};

inline constexpr std::size_t kCornerOracleMaxParams = 20;

/// Exhaustive search over {-b, +b}^n; the first minimiser in
/// lexicographic sign order ('-' before '+') wins.
CornerResult corner_oracle(const DeviceMapping& device, const Dataset& data, double th_g);

struct GapReport {
  double clean_accuracy = 0.0;
  double mc_mean = 0.0;
  double mc_min = 0.0;
  double attack_accuracy = 0.0;
  double gap = 0.0;  // mc_min - attack_accuracy, never negative
  std::size_t n_mc = 0;
  AttackResult attack;
};

/// MC (no write-verify) against pga_attack at the same th_g. When an MC
/// trial beats the attack, that trial's delta_w becomes the attack result.
GapReport mc_gap_report(const DeviceMapping& device, const Dataset& data, const VariationModel& vm,
                        const AttackConfig& cfg, std::size_t n_mc, std::uint64_t master_seed, unsigned jobs = 1);

Json gap_json(const GapReport& report, const VariationModel& vm, const AttackConfig& cfg);

}  // namespace cimrel
