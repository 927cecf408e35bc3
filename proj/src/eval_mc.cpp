#include "cimrel/eval_mc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cimrel/error.hpp"
#include "cimrel/parallel.hpp"
#include "cimrel/rng.hpp"

namespace cimrel {

std::size_t ceil_count(double x) {
  if (x <= 0.0) return 0;
  return static_cast<std::size_t>(std::ceil(x - 1e-9 * std::max(1.0, x)));
}

AccuracyDistribution AccuracyDistribution::from_values(std::vector<double> accuracies) {
  AccuracyDistribution d;
  d.n_runs = accuracies.size();
  d.accuracies = std::move(accuracies);
  std::ranges::sort(d.accuracies);
  return d;
}

AccuracyDistribution run_monte_carlo(const DeviceMapping& device, const Dataset& data, const VariationModel& vm,
                                     const VerifiedMask& mask, std::size_t n_runs, std::uint64_t master_seed,
                                     unsigned jobs) {
  if (n_runs < 1) throw Error("run_monte_carlo: n_runs must be >= 1");
  if (device.steps.size() != device.model.parameter_count()) {
    throw ShapeError("device mapping has " + std::to_string(device.steps.size()) + " steps for " +
                     std::to_string(device.model.parameter_count()) + " parameters");
  }
  vm.validate();

  AccuracyDistribution dist;
  dist.n_runs = n_runs;
  dist.master_seed = master_seed;
  dist.vm_digest = variation_digest(vm, mask);
  dist.trials.resize(n_runs);
  parallel_for(n_runs, jobs, [&](std::size_t i) {
    const std::uint64_t seed = stream_seed(master_seed, i);
    const ParamVector dw = sample_variation(device.steps, vm, mask, seed);
    dist.trials[i] = TrialOutcome{i, seed, accuracy(apply_noise(device.model, dw), data)};
  });
  dist.accuracies.reserve(n_runs);
  for (const auto& t : dist.trials) dist.accuracies.push_back(t.accuracy);
  std::ranges::sort(dist.accuracies);
  return dist;
}

KppEstimate kpp(const AccuracyDistribution& dist, double k) {
  if (dist.accuracies.empty()) throw Error("kpp: empty distribution");
  if (!(k > 0.0 && k <= 100.0)) throw Error("kpp: k must lie in (0, 100]");
  const std::size_t n = dist.accuracies.size();
  const std::size_t rank = std::clamp<std::size_t>(ceil_count(k / 100.0 * static_cast<double>(n)), 1, n) - 1;
  return KppEstimate{k, dist.accuracies[rank], rank, n < ceil_count(100.0 / k)};
}

namespace {

// P(B <= j) for B ~ Binomial(n, q), accumulated in log space.
std::vector<double> binomial_cdf(std::size_t n, double q) {
  std::vector<double> cdf(n + 1);
  double acc = 0.0;
  const double lq = std::log(q);
  const double l1q = std::log1p(-q);
  for (std::size_t j = 0; j <= n; ++j) {
    const double dj = static_cast<double>(j);
    const double dn = static_cast<double>(n);
    const double log_pmf = std::lgamma(dn + 1) - std::lgamma(dj + 1) - std::lgamma(dn - dj + 1) + dj * lq +
                           (dn - dj) * l1q;
    acc += std::exp(log_pmf);
    cdf[j] = std::min(acc, 1.0);
  }
  return cdf;
}

}  // namespace

KppInterval kpp_interval(const AccuracyDistribution& dist, double k, double confidence) {
  if (dist.accuracies.empty()) throw Error("kpp_interval: empty distribution");
  const std::size_t n = dist.accuracies.size();
  const double q = k / 100.0;
  const double alpha = (1.0 - confidence) / 2.0;
  std::size_t lo = 0;
  std::size_t hi = n - 1;
  if (q < 1.0) {
    const auto cdf = binomial_cdf(n, q);
    // X_(l) <= quantile unless B < l; X_(u) >= quantile unless B >= u (1-based ranks).
    for (std::size_t l = 1; l <= n; ++l) {
      if (cdf[l - 1] <= alpha) lo = l - 1;
    }
    for (std::size_t u = n; u >= 1; --u) {
      if (1.0 - cdf[u - 1] <= alpha) hi = u - 1;
      if (u == 1) break;
    }
    hi = std::max(hi, lo);
  }
  return KppInterval{dist.accuracies[lo], dist.accuracies[hi], lo, hi};
}

McSummary summarize(const AccuracyDistribution& dist) {
  if (dist.accuracies.empty()) throw Error("summarize: empty distribution");
  const auto& a = dist.accuracies;
  const double n = static_cast<double>(a.size());
  McSummary s;
  s.mean = std::accumulate(a.begin(), a.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : a) ss += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(ss / n);
  s.min = a.front();
  s.max = a.back();
  s.kpp_1 = kpp(dist, 1.0).value;
  s.kpp_5 = kpp(dist, 5.0).value;
  s.n_runs = a.size();
  s.master_seed = dist.master_seed;
  return s;
}

std::string trials_csv(const AccuracyDistribution& dist) {
  std::string out = "trial,seed,accuracy\n";
  for (const auto& t : dist.trials) {
    out += std::to_string(t.trial) + "," + std::to_string(t.seed) + "," + format_double(t.accuracy) + "\n";
  }
  return out;
}

Json summary_json(const AccuracyDistribution& dist) {
  const McSummary s = summarize(dist);
  const auto ci1 = kpp_interval(dist, 1.0);
  const auto ci5 = kpp_interval(dist, 5.0);
  return Json{{"mean", s.mean},
              {"std", s.std},
              {"min", s.min},
              {"max", s.max},
              {"kpp", {{"1", s.kpp_1}, {"5", s.kpp_5}}},
              {"kpp_ci95", {{"1", {ci1.lower, ci1.upper}}, {"5", {ci5.lower, ci5.upper}}}},
              {"n_runs", s.n_runs},
              {"master_seed", s.master_seed},
              {"vm_digest", dist.vm_digest}};
}

}  // namespace cimrel
