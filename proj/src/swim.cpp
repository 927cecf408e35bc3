#include "cimrel/swim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cimrel/error.hpp"
#include "cimrel/eval_mc.hpp"
#include "cimrel/rng.hpp"

namespace cimrel {

namespace {

// Sums each parameter's per-sample terms in ascending order.
ParamVector order_independent_mean(std::vector<std::vector<double>>& terms_by_param, std::size_t n_samples) {
  ParamVector out(terms_by_param.size());
  for (std::size_t p = 0; p < terms_by_param.size(); ++p) {
    auto& col = terms_by_param[p];
    std::ranges::sort(col);
    double acc = 0.0;
    for (double v : col) acc += v;
    out[p] = acc / static_cast<double>(n_samples);
  }
  return out;
}

std::string dataset_digest(const Tensor& inputs, std::span<const double> targets) {
  std::vector<double> all(inputs.data());
  all.insert(all.end(), targets.begin(), targets.end());
  return digest_doubles(all);
}

SensitivityScores scale_scores(const DeviceMapping& device, const VariationModel& vm, ParamVector diag) {
  vm.validate();
  if (device.steps.size() != diag.size()) throw ShapeError("sensitivity: device steps do not match parameters");
  SensitivityScores s;
  s.scores = std::move(diag);
  for (std::size_t i = 0; i < s.scores.size(); ++i) {
    const double sd = vm.sigma * device.steps[i];
    s.scores[i] = 0.5 * sd * sd * s.scores[i];
  }
  return s;
}

}  // namespace

ParamVector gauss_newton_diagonal(const Mlp& model, const Dataset& data) {
  const std::size_t n = data.size();
  const std::size_t p = model.parameter_count();
  const std::size_t classes = model.output_dim();
  std::vector<std::vector<double>> terms(p, std::vector<double>(n));
  std::vector<double> probs(classes), cotangent(classes), g(p);
  for (std::size_t s = 0; s < n; ++s) {
    const auto cache = forward_sample(model, data.inputs.row(s));
    const auto logits = cache.logits();
    const double m = *std::ranges::max_element(logits);
    double z = 0.0;
    for (std::size_t a = 0; a < classes; ++a) z += (probs[a] = std::exp(logits[a] - m));
    for (auto& v : probs) v /= z;

    for (std::size_t i = 0; i < p; ++i) terms[i][s] = 0.0;
    for (std::size_t a = 0; a < classes; ++a) {
      if (probs[a] == 0.0) continue;
      for (std::size_t b = 0; b < classes; ++b) cotangent[b] = (a == b ? 1.0 : 0.0) - probs[b];
      std::ranges::fill(g, 0.0);
      backward_sample(model, cache, cotangent, g, 1.0);
      for (std::size_t i = 0; i < p; ++i) terms[i][s] += probs[a] * g[i] * g[i];
    }
  }
  return order_independent_mean(terms, n);
}

ParamVector gauss_newton_diagonal_least_squares(const Mlp& model, const Tensor& inputs, const Tensor& targets) {
  if (inputs.rank() != 2 || targets.rank() != 2 || inputs.rows() != targets.rows() ||
      targets.cols() != model.output_dim()) {
    throw ShapeError("least-squares sensitivity: inputs " + inputs.shape_string() + " and targets " +
                     targets.shape_string() + " do not match the model");
  }
  const std::size_t n = inputs.rows();
  const std::size_t p = model.parameter_count();
  const std::size_t outputs = model.output_dim();
  std::vector<std::vector<double>> terms(p, std::vector<double>(n, 0.0));
  std::vector<double> cotangent(outputs), g(p);
  for (std::size_t s = 0; s < n; ++s) {
    const auto cache = forward_sample(model, inputs.row(s));
    for (std::size_t a = 0; a < outputs; ++a) {
      std::ranges::fill(cotangent, 0.0);
      cotangent[a] = 1.0;
      std::ranges::fill(g, 0.0);
      backward_sample(model, cache, cotangent, g, 1.0);
      for (std::size_t i = 0; i < p; ++i) terms[i][s] += 2.0 * g[i] * g[i];
    }
  }
  return order_independent_mean(terms, n);
}

SensitivityScores sensitivity(const DeviceMapping& device, const Dataset& data, const VariationModel& vm) {
  SensitivityScores s = scale_scores(device, vm, gauss_newton_diagonal(device.model, data));
  std::vector<double> t(data.targets.begin(), data.targets.end());
  s.dataset_digest = dataset_digest(data.inputs, t);
  return s;
}

SensitivityScores sensitivity_least_squares(const DeviceMapping& device, const Tensor& inputs,
                                            const Tensor& targets, const VariationModel& vm) {
  SensitivityScores s =
      scale_scores(device, vm, gauss_newton_diagonal_least_squares(device.model, inputs, targets));
  s.dataset_digest = dataset_digest(inputs, targets.data());
  return s;
}

double normalized_write_cycles(const VerifiedMask& mask, const VariationModel& vm) {
  if (vm.verify_cost_V < 1.0) throw Error("normalized_write_cycles: verify_cost_V must be >= 1");
  if (mask.size() == 0) throw Error("normalized_write_cycles: empty mask");
  const double n = static_cast<double>(mask.size());
  const double verified = static_cast<double>(mask.count());
  return ((n - verified) + verified * vm.verify_cost_V) / (n * vm.verify_cost_V);
}

double normalized_write_cycles(const WriteVerifyPlan& plan, const VariationModel& vm) {
  return normalized_write_cycles(plan.mask, vm);
}

WriteVerifyPlan rank_and_select(const SensitivityScores& scores, double budget_fraction, const VariationModel& vm,
                                std::size_t group_size) {
  if (!(budget_fraction >= 0.0 && budget_fraction <= 1.0)) throw Error("rank_and_select: budget must lie in [0, 1]");
  if (group_size < 1) throw Error("rank_and_select: group_size must be >= 1");
  const auto& s = scores.scores;
  const std::size_t n = s.size();

  WriteVerifyPlan plan;
  plan.budget_fraction = budget_fraction;
  plan.group_size = group_size;
  plan.method = scores.method;
  plan.order.resize(n);
  std::iota(plan.order.begin(), plan.order.end(), std::size_t{0});
  std::ranges::stable_sort(plan.order, [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });

  const std::size_t take = std::min(n, ceil_count(budget_fraction * static_cast<double>(n)));
  plan.mask = VerifiedMask::none(n);
  for (std::size_t r = 0; r < take; ++r) {
    const std::size_t idx = plan.order[r];
    const std::size_t first = idx / group_size * group_size;
    for (std::size_t j = first; j < std::min(n, first + group_size); ++j) plan.mask.set(j);
  }
  plan.normalized_cycles = normalized_write_cycles(plan.mask, vm);
  return plan;
}

SensitivityScores magnitude_scores(const Mlp& model) {
  SensitivityScores s;
  s.method = "magnitude";
  s.scores = model.flatten();
  for (auto& v : s.scores) v = std::abs(v);
  return s;
}

VerifiedMask random_mask(std::size_t n, std::size_t count, std::uint64_t seed) {
  if (count > n) throw Error("random_mask: count exceeds size");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  VerifiedMask mask = VerifiedMask::none(n);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + rng.uniform_index(n - i);
    std::swap(idx[i], idx[j]);
    mask.set(idx[i]);
  }
  return mask;
}

TargetSearch meet_accuracy_target(const DeviceMapping& device, const Dataset& data, const VariationModel& vm,
                                  double target_drop, const TargetSearchOptions& opts) {
  if (opts.budget_grid.empty()) throw Error("meet_accuracy_target: empty budget grid");
  for (std::size_t i = 0; i < opts.budget_grid.size(); ++i) {
    const double b = opts.budget_grid[i];
    if (!(b >= 0.0 && b <= 1.0) || (i > 0 && b < opts.budget_grid[i - 1])) {
      throw Error("meet_accuracy_target: budget grid must be ascending within [0, 1]");
    }
  }
  TargetSearch result;
  result.clean_accuracy = accuracy(device.model, data);
  result.target_drop = target_drop;
  const SensitivityScores scores = sensitivity(device, data, vm);
  for (double budget : opts.budget_grid) {
    WriteVerifyPlan plan = rank_and_select(scores, budget, vm, opts.group_size);
    const auto dist = run_monte_carlo(device, data, vm, plan.mask, opts.n_mc, opts.master_seed, opts.jobs);
    const McSummary s = summarize(dist);
    result.curve.push_back(CurvePoint{budget, plan.mask.count(), s.mean, s.kpp_1, plan.normalized_cycles});
    if (!result.feasible && s.mean >= result.clean_accuracy - target_drop) {
      result.feasible = true;
      result.plan = std::move(plan);
    }
  }
  return result;
}

double sign_test_p_value(std::size_t wins, std::size_t losses) {
  const std::size_t n = wins + losses;
  if (n == 0) return 1.0;
  double p = 0.0;
  for (std::size_t x = wins; x <= n; ++x) {
    const double dn = static_cast<double>(n);
    const double dx = static_cast<double>(x);
    p += std::exp(std::lgamma(dn + 1) - std::lgamma(dx + 1) - std::lgamma(dn - dx + 1) - dn * std::log(2.0));
  }
  return std::min(p, 1.0);
}

SelectionComparison swim_vs_random(const DeviceMapping& device, const Dataset& data, const VariationModel& vm,
                                   double budget, std::size_t n_seeds, std::size_t n_mc, std::uint64_t master_seed,
                                   unsigned jobs) {
  if (n_seeds < 20) throw Error("swim_vs_random: n_seeds must be >= 20");
  const std::size_t n = device.model.parameter_count();
  const WriteVerifyPlan swim = rank_and_select(sensitivity(device, data, vm), budget, vm);
  const WriteVerifyPlan magnitude = rank_and_select(magnitude_scores(device.model), budget, vm);

  SelectionComparison cmp;
  cmp.budget = budget;
  cmp.mask_count = swim.mask.count();
  for (std::size_t s = 0; s < n_seeds; ++s) {
    const std::uint64_t mc_seed = stream_seed(master_seed, 2 * s);
    const VerifiedMask rand = random_mask(n, cmp.mask_count, stream_seed(master_seed, 2 * s + 1));
    auto mean_of = [&](const VerifiedMask& m) { return summarize(run_monte_carlo(device, data, vm, m, n_mc, mc_seed, jobs)).mean; };
    PairedSeedRow row{s, mean_of(swim.mask), mean_of(rand), mean_of(magnitude.mask)};
    if (row.swim_mean > row.random_mean) {
      ++cmp.wins;
    } else if (row.swim_mean < row.random_mean) {
      ++cmp.losses;
    } else {
      ++cmp.ties;
    }
    cmp.swim_mean += row.swim_mean;
    cmp.random_mean += row.random_mean;
    cmp.magnitude_mean += row.magnitude_mean;
    cmp.rows.push_back(row);
  }
  const double k = static_cast<double>(n_seeds);
  cmp.swim_mean /= k;
  cmp.random_mean /= k;
  cmp.magnitude_mean /= k;
  cmp.sign_test_p = sign_test_p_value(cmp.wins, cmp.losses);
  return cmp;
}

Json plan_json(const WriteVerifyPlan& plan) {
  return Json{{"order", plan.order},
              {"budget", plan.budget_fraction},
              {"group_size", plan.group_size},
              {"mask_count", plan.mask.count()},
              {"normalized_cycles", plan.normalized_cycles},
              {"method", plan.method}};
}

std::string curve_csv(const std::vector<CurvePoint>& curve) {
  std::string out = "budget,mean_acc,kpp1,cycles\n";
  for (const auto& c : curve) {
    out += format_double(c.budget) + "," + format_double(c.mean_acc) + "," + format_double(c.kpp1) + "," +
           format_double(c.cycles) + "\n";
  }
  return out;
}

Json comparison_json(const SelectionComparison& cmp) {
  Json rows = Json::array();
  for (const auto& r : cmp.rows) {
    rows.push_back(Json{{"seed_index", r.seed_index},
                        {"swim_mean", r.swim_mean},
                        {"random_mean", r.random_mean},
                        {"magnitude_mean", r.magnitude_mean}});
  }
  return Json{{"budget", cmp.budget},
              {"mask_count", cmp.mask_count},
              {"swim_mean", cmp.swim_mean},
              {"random_mean", cmp.random_mean},
              {"magnitude_mean", cmp.magnitude_mean},
              {"wins", cmp.wins},
              {"ties", cmp.ties},
              {"losses", cmp.losses},
              {"sign_test_p", cmp.sign_test_p},
              {"rows", std::move(rows)}};
}

}  // namespace cimrel
