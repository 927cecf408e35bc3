#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "cimrel/checkpoint.hpp"
#include "cimrel/error.hpp"
#include "cimrel/rng.hpp"
#include "support.hpp"

using namespace cimrel;
using namespace cimrel::testing;

namespace {

Mlp single_layer(std::size_t in, std::size_t out, std::vector<double> w, std::vector<double> b,
                 Activation act = Activation::identity) {
  return Mlp({DenseLayer{Tensor({out, in}, std::move(w)), Tensor({out}, std::move(b)), act}});
}

Dataset one_hot_data(std::vector<double> x, std::size_t d, std::vector<int> t, std::size_t classes) {
  const std::size_t n = t.size();
  return Dataset::make(Tensor({n, d}, std::move(x)), std::move(t), classes);
}

}  // namespace

TEST_SUITE("nn") {

TEST_CASE("identity layer passes inputs through") {
  const Mlp m = single_layer(2, 2, {1, 0, 0, 1}, {0, 0});
  const Tensor x({3, 2}, {0.5, -1.25, 3.0, 7.0, -2.0, 0.0});
  CHECK(forward(m, x) == x);
}

TEST_CASE("zero model gives zero logits and ln 2 loss") {
  const Mlp m = single_layer(3, 2, std::vector<double>(6, 0.0), {0, 0});
  const Dataset d = one_hot_data({1, 2, 3, -4, 5, 6}, 3, {0, 1}, 2);
  const Tensor z = forward(m, d.inputs);
  for (double v : z.data()) CHECK(v == 0.0);
  CHECK(loss_and_grads(m, d).loss == doctest::Approx(0.693147180559945).epsilon(1e-14));
}

TEST_CASE("hand-computed 2-2-2 logits") {
  const Json fx = read_json_file(std::filesystem::path(CIMREL_TEST_FIXTURES) / "hand_222.json");
  const Mlp m = checkpoint_from_json(fx);
  for (const auto& c : fx.at("cases")) {
    const auto x = c.at("input").get<std::vector<double>>();
    const auto cache = forward_sample(m, x);
    CHECK(cache.post[1] == c.at("hidden").get<std::vector<double>>());
    const auto logits = cache.logits();
    CHECK(std::vector<double>(logits.begin(), logits.end()) == c.at("logits").get<std::vector<double>>());
  }
}

TEST_CASE("confident correct logits drive the loss to zero") {
  const Dataset d = one_hot_data({1, -1}, 1, {0, 1}, 2);
  double previous = 1e9;
  for (double scale : {1.0, 10.0, 100.0}) {
    const Mlp m = single_layer(1, 2, {scale, -scale}, {0, 0});
    const double loss = loss_and_grads(m, d).loss;
    CHECK(loss < previous);
    previous = loss;
  }
  CHECK(previous < 1e-80);
}

TEST_CASE("width mismatch names the layer") {
  const Mlp m = Mlp::initialize(std::vector<std::size_t>{3, 4, 2}, 1);
  try {
    forward(m, Tensor({1, 2}, {1, 2}));
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("layer 0") != std::string::npos);
    CHECK(std::string(e.what()).find("3") != std::string::npos);
  }
  CHECK_THROWS_AS(Mlp({DenseLayer{Tensor({4, 3}), Tensor({4}), Activation::relu},
                       DenseLayer{Tensor({2, 5}), Tensor({2}), Activation::identity}}),
                  ShapeError);
}

TEST_CASE("empty batch is rejected") {
  const Mlp m = Mlp::initialize(std::vector<std::size_t>{2, 2}, 1);
  const Dataset d = gen_dataset("blobs", 8, 0.1, 1);
  CHECK_THROWS(loss_and_grads(m, d, std::span<const std::size_t>{}));
}

TEST_CASE("analytic gradients match central differences") {
  Rng rng(2024);
  int checked = 0;
  for (int draw = 0; draw < 100; ++draw) {
    const std::size_t depth = 1 + rng.uniform_index(3);
    std::vector<std::size_t> dims{1 + rng.uniform_index(4)};
    for (std::size_t l = 0; l < depth; ++l) dims.push_back(2 + rng.uniform_index(4));
    const Mlp m = Mlp::initialize(dims, rng.next_u64());
    const std::size_t n = 1 + rng.uniform_index(16);
    Tensor x = Tensor::matrix(n, dims.front());
    std::vector<int> t(n);
    for (auto& v : x.data()) v = rng.uniform(-2.0, 2.0);
    for (auto& v : t) v = static_cast<int>(rng.uniform_index(dims.back()));
    const Dataset d = Dataset::make(std::move(x), std::move(t), dims.back());

    ParamVector p = m.flatten();
    for (auto& v : p) v += rng.uniform(-0.1, 0.1);  // nonzero biases too
    const LossGrad lg = loss_and_grads(m.with_parameters(p), d);
    const auto relu = relu_flags(m);
    CHECK(lg.loss == doctest::Approx(reference_loss(dims, relu, p, d)).epsilon(1e-12));

    const double h = 1e-5;
    for (std::size_t i = 0; i < p.size(); ++i) {
      ParamVector plus = p, minus = p;
      plus[i] += h;
      minus[i] -= h;
      const double fd = (reference_loss(dims, relu, plus, d) - reference_loss(dims, relu, minus, d)) / (2 * h);
      const double err = std::abs(fd - lg.grads[i]);
      const double tol = std::max(1e-8, 1e-4 * std::max(std::abs(fd), std::abs(lg.grads[i])));
      if (err > tol) FAIL_CHECK("draw " << draw << " param " << i << " analytic " << lg.grads[i] << " fd " << fd);
      ++checked;
    }
  }
  CHECK(checked > 1000);
}

TEST_CASE("sgd: lr 0 leaves parameters alone") {
  ParamVector p{1.0, -2.0, 3.5};
  const ParamVector before = p;
  SgdState st;
  sgd_update(p, ParamVector{0.3, 0.2, -0.1}, 0.0, 0.9, st);
  CHECK(p == before);
}

TEST_CASE("sgd on L = w^2") {
  SUBCASE("one plain step from w = 1") {
    ParamVector w{1.0};
    SgdState st;
    sgd_update(w, ParamVector{2.0 * w[0]}, 0.1, 0.0, st);
    CHECK(w[0] == doctest::Approx(0.8).epsilon(1e-15));
  }
  SUBCASE("two momentum steps follow the scalar recurrence") {
    ParamVector w{1.0};
    SgdState st;
    double ref_w = 1.0, ref_v = 0.0;
    for (int step = 0; step < 2; ++step) {
      const double g = 2.0 * w[0];
      sgd_update(w, ParamVector{g}, 0.1, 0.9, st);
      ref_v = 0.9 * ref_v + 2.0 * ref_w;
      ref_w -= 0.1 * ref_v;
      CHECK(w[0] == ref_w);
    }
    CHECK(w[0] == doctest::Approx(0.46).epsilon(1e-14));
  }
}

TEST_CASE("sgd rejects non-finite gradients and bad settings") {
  ParamVector p{1.0};
  SgdState st;
  CHECK_THROWS_AS(sgd_update(p, ParamVector{std::nan("")}, 0.1, 0.0, st), NumericError);
  CHECK_THROWS(sgd_update(p, ParamVector{1.0}, 0.1, 1.0, st));
  CHECK_THROWS(sgd_update(p, ParamVector{1.0}, -0.1, 0.0, st));
}

TEST_CASE("training with lr 0 returns the initial weights") {
  const Dataset d = gen_dataset("blobs", 40, 0.5, 3);
  const Mlp init = Mlp::initialize(std::vector<std::size_t>{2, 4, 2}, 3);
  TrainConfig tc{.epochs = 3, .lr = 0.0, .momentum = 0.9, .batch_size = 8, .seed = 3};
  const TrainResult r = train(init, d, tc);
  CHECK(r.model == init);
  CHECK(r.loss_history.size() == 3);
}

TEST_CASE("blobs fixture trains above 95%") {
  CHECK(accuracy(blobs_fixture().trained, blobs_fixture().data) >= 0.95);
}

TEST_CASE("training is deterministic down to the checkpoint bytes") {
  const Dataset d = gen_dataset("moons", 100, 0.1, 5);
  const Mlp init = Mlp::initialize(std::vector<std::size_t>{2, 8, 2}, 5);
  const TrainConfig tc{.epochs = 5, .lr = 0.05, .momentum = 0.9, .batch_size = 16, .seed = 11};
  const auto a = train(init, d, tc);
  const auto b = train(init, d, tc);
  CHECK(dump_json(checkpoint_to_json(a.model, Json{})) == dump_json(checkpoint_to_json(b.model, Json{})));
  CHECK(a.loss_history == b.loss_history);
}

TEST_CASE("first epoch lowers the loss on most seeds") {
  const Dataset d = gen_dataset("blobs", 400, 0.5, 7);
  int lowered = 0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Mlp init = Mlp::initialize(blobs_dims(), s);
    TrainConfig tc = blobs_train_config(s);
    tc.epochs = 1;
    lowered += mean_loss(train(init, d, tc).model, d) < mean_loss(init, d);
  }
  CHECK(lowered >= 9);
}

TEST_CASE("divergence is reported with the epoch") {
  const Dataset d = gen_dataset("blobs", 64, 0.5, 1);
  const Mlp init = Mlp::initialize(std::vector<std::size_t>{2, 8, 2}, 1);
  const TrainConfig tc{.epochs = 20, .lr = 1e200, .momentum = 0.9, .batch_size = 8, .seed = 1};
  try {
    train(init, d, tc);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("epoch") != std::string::npos);
  }
}

TEST_CASE("accuracy examples") {
  // Constant class 0: the class-1 logit is always -1.
  const Mlp m = single_layer(1, 2, {0, 0}, {0, -1});
  CHECK(accuracy(m, one_hot_data({1, 2, 3}, 1, {0, 0, 0}, 2)) == 1.0);
  CHECK(accuracy(m, one_hot_data({1, 2, 3}, 1, {1, 1, 1}, 2)) == 0.0);
  CHECK(accuracy(m, one_hot_data({1, 2}, 1, {0, 1}, 2)) == 0.5);
  // Tied logits resolve to class 0.
  const Mlp tie = single_layer(1, 2, {0, 0}, {0, 0});
  CHECK(accuracy(tie, one_hot_data({5}, 1, {0}, 2)) == 1.0);
}

TEST_CASE("flatten and assign round-trip exactly") {
  const Mlp m = Mlp::initialize(std::vector<std::size_t>{3, 5, 4, 2}, 99);
  ParamVector p = m.flatten();
  CHECK(p.size() == m.parameter_count());
  CHECK(m.with_parameters(p) == m);
  // Layout: layer 0 weights row-major, then its bias.
  CHECK(p[1] == m.layers()[0].weight(0, 1));
  CHECK(p[15] == m.layers()[0].bias[0]);
  CHECK_THROWS_AS(m.with_parameters(ParamVector(p.size() - 1)), ShapeError);
}

TEST_CASE("checkpoint round trip is lossless") {
  const auto dir = std::filesystem::temp_directory_path() / "cimrel_nn_ckpt";
  const Mlp m = blobs_fixture().trained;
  save_checkpoint(dir / "m.json", m, Json{{"seed", 7}});
  CHECK(load_checkpoint(dir / "m.json") == m);
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(checkpoint_from_json(Json{{"arch", {2, 2}}}), FormatError);
}

}  // TEST_SUITE
