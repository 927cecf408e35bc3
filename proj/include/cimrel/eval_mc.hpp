#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cimrel/device.hpp"
#include "cimrel/json_io.hpp"
#include "cimrel/nn.hpp"

namespace cimrel {

/// ceil(x) that forgives representation error in products such as 0.1 * 1000.
std::size_t ceil_count(double x);

struct TrialOutcome {
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  double accuracy = 0.0;
};

struct AccuracyDistribution {
  std::vector<double> accuracies;    // ascending
  std::vector<TrialOutcome> trials;  // trial order; empty for synthetic distributions
  std::size_t n_runs = 0;
  std::uint64_t master_seed = 0;
  std::string vm_digest;

  /// Wraps known accuracies (sorted on construction).
  static AccuracyDistribution from_values(std::vector<double> accuracies);
};

/// Each trial i draws delta_w from stream_seed(master_seed, i) and scores
/// the perturbed model. Output does not depend on `jobs`.
AccuracyDistribution run_monte_carlo(const DeviceMapping& device, const Dataset& data, const VariationModel& vm,
                                     const VerifiedMask& mask, std::size_t n_runs, std::uint64_t master_seed,
                                     unsigned jobs = 1);

/// k-th percentile performance: the lower order statistic at 0-based rank
/// ceil(k/100 * n) - 1, so at most k% of trials fall strictly below it.
struct KppEstimate {
  double k = 1.0;  // percent, (0, 100]
  double value = 0.0;
  std::size_t rank_index = 0;
  bool under_resolved = false;  // n_runs < ceil(100 / k)
};

KppEstimate kpp(const AccuracyDistribution& dist, double k);

/// Distribution-free interval for the true k-th percentile from the
/// binomial law of order statistics. Advisory only.
struct KppInterval {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t lower_rank = 0;  // 0-based
  std::size_t upper_rank = 0;
};

KppInterval kpp_interval(const AccuracyDistribution& dist, double k, double confidence = 0.95);

struct McSummary {
  double mean = 0.0;
  double std = 0.0;  // population
  double min = 0.0;
  double max = 0.0;
  double kpp_1 = 0.0;
  double kpp_5 = 0.0;
  std::size_t n_runs = 0;
  std::uint64_t master_seed = 0;
};

McSummary summarize(const AccuracyDistribution& dist);

/// "trial,seed,accuracy" rows in trial order.
std::string trials_csv(const AccuracyDistribution& dist);

/// {mean, std, min, max, kpp:{"1","5"}, kpp_ci95, n_runs, master_seed, vm_digest}
Json summary_json(const AccuracyDistribution& dist);

}  // namespace cimrel
