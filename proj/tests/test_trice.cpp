#include <doctest.h>

#include <cmath>

#include "cimrel/checkpoint.hpp"
#include "cimrel/eval_mc.hpp"
#include "cimrel/trice.hpp"
#include "support.hpp"

using namespace cimrel;
using namespace cimrel::testing;

TEST_SUITE("trice") {

TEST_CASE("censored noise: degenerate cases") {
  for (double v : sample_censored_noise(100, 0.0, 1.0, 3)) CHECK(v == 0.0);
  CHECK_THROWS(sample_censored_noise(10, -1.0, 1.0, 3));
}

TEST_CASE("uncensored limit has zero mean") {
  const std::size_t n = 1000000;
  const auto g = sample_censored_noise(n, 2.0, kNoCensoring, 8);
  double s = 0.0;
  for (double v : g) s += v;
  CHECK(std::abs(s / n) < 3.0 * 2.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("censored fraction and mean") {
  const std::size_t n = 100000;
  const double sigma = 0.7;
  for (double T : {0.0, 1.0, 2.0}) {
    CAPTURE(T);
    const auto g = sample_censored_noise(n, sigma, T, 100 + static_cast<std::uint64_t>(T));
    std::size_t at_cap = 0;
    double s1 = 0.0, s2 = 0.0;
    for (double v : g) {
      REQUIRE(v <= T * sigma);
      at_cap += v == T * sigma;
      s1 += v;
      s2 += v * v;
    }
    const double p = 1.0 - normal_cdf(T);
    CHECK(std::abs(static_cast<double>(at_cap) / n - p) < 3.0 * std::sqrt(p * (1 - p) / n));
    const double mean = s1 / n;
    const double se = std::sqrt((s2 / n - mean * mean) / n);
    CHECK(std::abs(mean - censored_normal_mean(sigma, T)) < 3.0 * se);
    CHECK(mean < 0.0);
  }
}

TEST_CASE("sigma_train 0 is plain training") {
  const Dataset d = gen_dataset("blobs", 120, 0.5, 2);
  const Mlp init = Mlp::initialize(std::vector<std::size_t>{2, 6, 2}, 2);
  TriceConfig cfg;
  cfg.sigma_train = 0.0;
  cfg.train = TrainConfig{.epochs = 5, .lr = 0.05, .momentum = 0.9, .batch_size = 16, .seed = 4};
  const auto a = trice_train(init, d, cfg);
  const auto b = train(init, d, cfg.train);
  CHECK(a.model == b.model);
  CHECK(a.loss_history == b.loss_history);
}

TEST_CASE("infinite censor point matches a censor point that never triggers") {
  const Dataset d = gen_dataset("blobs", 120, 0.5, 2);
  const Mlp init = Mlp::initialize(std::vector<std::size_t>{2, 6, 2}, 2);
  TriceConfig cfg;
  cfg.sigma_train = 1.0;
  cfg.quant = QuantizationSpec{4};
  cfg.train = TrainConfig{.epochs = 5, .lr = 0.02, .momentum = 0.9, .batch_size = 16, .seed = 4};
  cfg.censor_T = kNoCensoring;
  const auto inf = trice_train(init, d, cfg);
  cfg.censor_T = 1e6;
  const auto huge = trice_train(init, d, cfg);
  CHECK(inf.model == huge.model);
  cfg.censor_T = 0.5;
  CHECK_FALSE(trice_train(init, d, cfg).model == inf.model);
  cfg.censor_T = kNoCensoring;
  CHECK(trice_train(init, d, cfg).model == inf.model);
}

TEST_CASE("config json keeps the infinite censor point") {
  TriceConfig c;
  c.sigma_train = 1.5;
  c.censor_T = kNoCensoring;
  const Json j = c.to_json();
  CHECK(j["censor_T"].is_null());
  CHECK(std::isinf(TriceConfig::from_json(j).censor_T));
  CHECK(std::isinf(TriceConfig::from_json(Json{{"censor_T", "inf"}}).censor_T));
  CHECK(TriceConfig::from_json(Json{{"censor_T", 2.0}}).censor_T == 2.0);
  CHECK_THROWS(TriceConfig::from_json(Json{{"sigma_train", -1.0}}));
}

TEST_CASE("benchmark rows") {
  const auto& f = blobs_fixture();
  const std::vector<double> ks{1.0, 5.0};
  SUBCASE("identical models give identical rows") {
    const auto t = kpp_benchmark({{"a", f.device}, {"b", f.device}}, f.data, blobs_variation(), 300, ks, 6);
    CHECK(t.rows[0].kpp == t.rows[1].kpp);
    CHECK(t.rows[0].mean_acc == t.rows[1].mean_acc);
    CHECK(t.rows[1].kpp_delta == std::vector<double>{0.0, 0.0});
  }
  SUBCASE("no noise gives the clean accuracy") {
    VariationModel vm = blobs_variation();
    vm.sigma = 0.0;
    const auto t = kpp_benchmark({{"a", f.device}}, f.data, vm, 50, ks, 6);
    for (double v : t.rows[0].kpp) CHECK(v == accuracy(f.device.model, f.data));
  }
  SUBCASE("each row uses the same draws as a plain MC run") {
    const DeviceMapping other = map_to_device(f.trained, QuantizationSpec{6});
    const auto t = kpp_benchmark({{"four", f.device}, {"six", other}}, f.data, blobs_variation(), 400, ks, 13, 4);
    const auto none = VerifiedMask::none(f.device.steps.size());
    const auto d4 = run_monte_carlo(f.device, f.data, blobs_variation(), none, 400, 13);
    const auto d6 = run_monte_carlo(other, f.data, blobs_variation(), none, 400, 13);
    CHECK(t.rows[0].kpp[0] == kpp(d4, 1).value);
    CHECK(t.rows[1].kpp[1] == kpp(d6, 5).value);
    CHECK(t.rows[0].mean_acc == summarize(d4).mean);
    CHECK(t.rows[1].mean_acc == summarize(d6).mean);
  }
  CHECK(benchmark_csv(BenchmarkTable{}).starts_with("model,k,kpp,mean_acc,n_runs,sigma,th_g\n"));
}

}  // TEST_SUITE
