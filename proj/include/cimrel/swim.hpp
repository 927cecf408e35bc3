#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cimrel/device.hpp"
#include "cimrel/json_io.hpp"
#include "cimrel/nn.hpp"

namespace cimrel {

inline constexpr const char* kGaussNewtonDiag = "gauss_newton_diag";

/// Expected loss increase per parameter under its own device noise.
struct SensitivityScores {
  ParamVector scores;  // >= 0
  std::string method = kGaussNewtonDiag;
  std::string dataset_digest;
};

/// Dataset-mean Gauss-Newton diagonal of softmax cross-entropy:
///   H_ii = sum_a p_a * (J_ai - sum_b p_b J_bi)^2,  J = d logits / d params.
/// Per-sample terms are summed in sorted order, so the result is
/// bit-identical under any permutation of the samples.
ParamVector gauss_newton_diagonal(const Mlp& model, const Dataset& data);

/// Same for L = sum_a (f_a(x) - y_a)^2 with real targets [n x C]:
///   H_ii = 2 sum_a J_ai^2  (exact for linear-output least squares).
ParamVector gauss_newton_diagonal_least_squares(const Mlp& model, const Tensor& inputs, const Tensor& targets);

/// score_i = 1/2 (sigma * step_i)^2 * H_ii.
SensitivityScores sensitivity(const DeviceMapping& device, const Dataset& data, const VariationModel& vm);
SensitivityScores sensitivity_least_squares(const DeviceMapping& device, const Tensor& inputs,
                                            const Tensor& targets, const VariationModel& vm);

/// Verified fraction of a plan -> write cost relative to verifying every device.
struct WriteVerifyPlan {
  std::vector<std::size_t> order;  // descending score, ties -> lower index
  double budget_fraction = 0.0;
  std::size_t group_size = 1;
  VerifiedMask mask;
  double normalized_cycles = 0.0;
  std::string method = kGaussNewtonDiag;
};

/// Marks the first ceil(budget * n) entries of the descending order. With
/// group_size > 1 the mask is OR-ed over contiguous index groups.
WriteVerifyPlan rank_and_select(const SensitivityScores& scores, double budget_fraction, const VariationModel& vm,
                                std::size_t group_size = 1);

/// (n_unverified * 1 + n_verified * V) / (n * V)
double normalized_write_cycles(const VerifiedMask& mask, const VariationModel& vm);
double normalized_write_cycles(const WriteVerifyPlan& plan, const VariationModel& vm);

/// |w| scores for the magnitude heuristic.
SensitivityScores magnitude_scores(const Mlp& model);

/// `count` distinct indices of [0, n) chosen uniformly.
VerifiedMask random_mask(std::size_t n, std::size_t count, std::uint64_t seed);

inline const std::vector<double> kDefaultBudgetGrid{0.0, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0};

struct CurvePoint {
  double budget = 0.0;
  std::size_t mask_count = 0;
  double mean_acc = 0.0;
  double kpp1 = 0.0;
  double cycles = 0.0;
};

struct TargetSearch {
  bool feasible = false;
  double clean_accuracy = 0.0;
  double target_drop = 0.0;
  std::optional<WriteVerifyPlan> plan;  // set when feasible
  std::vector<CurvePoint> curve;        // every grid point, feasible or not
};

struct TargetSearchOptions {
  std::vector<double> budget_grid = kDefaultBudgetGrid;
  std::size_t n_mc = 200;
  std::uint64_t master_seed = 0;
  std::size_t group_size = 1;
  unsigned jobs = 1;
};

/// Walks the grid upward and picks the first budget whose MC mean accuracy
/// is >= clean - target_drop. The whole curve is always evaluated.
TargetSearch meet_accuracy_target(const DeviceMapping& device, const Dataset& data, const VariationModel& vm,
                                  double target_drop, const TargetSearchOptions& opts);

struct PairedSeedRow {
  std::size_t seed_index = 0;
  double swim_mean = 0.0;
  double random_mean = 0.0;
  double magnitude_mean = 0.0;
};

struct SelectionComparison {
  double budget = 0.0;
  std::size_t mask_count = 0;
  std::vector<PairedSeedRow> rows;
  double swim_mean = 0.0;
  double random_mean = 0.0;
  double magnitude_mean = 0.0;
  std::size_t wins = 0;    // swim > random
  std::size_t ties = 0;
  std::size_t losses = 0;
  double sign_test_p = 1.0;  // one-sided, H1: swim better
};

/// For every seed: same MC draws, three equal-size masks (SWIM, uniformly
/// random, largest |w|). The SWIM and magnitude masks do not depend on the seed.
SelectionComparison swim_vs_random(const DeviceMapping& device, const Dataset& data, const VariationModel& vm,
                                   double budget, std::size_t n_seeds, std::size_t n_mc, std::uint64_t master_seed,
                                   unsigned jobs = 1);

/// One-sided P(X >= wins) for X ~ Binomial(wins + losses, 1/2).
double sign_test_p_value(std::size_t wins, std::size_t losses);

Json plan_json(const WriteVerifyPlan& plan);
std::string curve_csv(const std::vector<CurvePoint>& curve);
Json comparison_json(const SelectionComparison& cmp);

}  // namespace cimrel
