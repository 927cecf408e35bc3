#include "cimrel/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "cimrel/error.hpp"
#include "cimrel/rng.hpp"

namespace cimrel {

std::string_view to_string(Activation a) noexcept {
  switch (a) {
    case Activation::relu:
      return "relu";
    case Activation::identity:
      return "identity";
  }
  return "identity";
}

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "identity") return Activation::identity;
  throw FormatError("unknown activation '" + std::string(name) + "' (expected relu or identity)");
}

// ---------------------------------------------------------------------------
// Mlp

Mlp::Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw ShapeError("an Mlp needs at least one layer");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.weight.rank() != 2) {
      throw ShapeError("layer " + std::to_string(l) + ": weight must be rank 2, got " +
                       layer.weight.shape_string());
    }
    if (layer.bias.size() != layer.out()) {
      throw ShapeError("layer " + std::to_string(l) + ": bias has " + std::to_string(layer.bias.size()) +
                       " entries, expected " + std::to_string(layer.out()));
    }
    if (l > 0 && layer.in() != layers_[l - 1].out()) {
      throw ShapeError("layer " + std::to_string(l) + ": expects input width " + std::to_string(layer.in()) +
                       " but layer " + std::to_string(l - 1) + " outputs " +
                       std::to_string(layers_[l - 1].out()));
    }
    parameter_count_ += layer.parameter_count();
  }
}

Mlp Mlp::initialize(std::span<const std::size_t> dims, std::uint64_t seed, Activation hidden) {
  if (dims.size() < 2) throw ShapeError("need at least input and output dimensions");
  Rng rng(seed);
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const std::size_t in = dims[l];
    const std::size_t out = dims[l + 1];
    DenseLayer layer{Tensor::matrix(out, in), Tensor({out}),
                     l + 2 == dims.size() ? Activation::identity : hidden};
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    for (auto& w : layer.weight.data()) w = rng.uniform(-limit, limit);
    layers.push_back(std::move(layer));
  }
  return Mlp(std::move(layers));
}

std::size_t Mlp::input_dim() const { return layers_.front().in(); }
std::size_t Mlp::output_dim() const { return layers_.back().out(); }

std::vector<std::size_t> Mlp::dims() const {
  std::vector<std::size_t> d{input_dim()};
  for (const auto& layer : layers_) d.push_back(layer.out());
  return d;
}

ParamVector Mlp::flatten() const {
  ParamVector params;
  params.reserve(parameter_count_);
  for (const auto& layer : layers_) {
    params.insert(params.end(), layer.weight.data().begin(), layer.weight.data().end());
    params.insert(params.end(), layer.bias.data().begin(), layer.bias.data().end());
  }
  return params;
}

void Mlp::assign(std::span<const double> params) {
  if (params.size() != parameter_count_) {
    throw ShapeError("parameter vector has " + std::to_string(params.size()) + " entries, model has " +
                     std::to_string(parameter_count_));
  }
  auto it = params.begin();
  for (auto& layer : layers_) {
    std::copy_n(it, layer.weight.size(), layer.weight.data().begin());
    it += static_cast<std::ptrdiff_t>(layer.weight.size());
    std::copy_n(it, layer.bias.size(), layer.bias.data().begin());
    it += static_cast<std::ptrdiff_t>(layer.bias.size());
  }
}

Mlp Mlp::with_parameters(std::span<const double> params) const {
  Mlp copy = *this;
  copy.assign(params);
  return copy;
}

// ---------------------------------------------------------------------------
// Dataset

Dataset Dataset::make(Tensor inputs, std::vector<int> targets, std::size_t num_classes) {
  if (inputs.rank() != 2) throw ShapeError("dataset inputs must be [n x d], got " + inputs.shape_string());
  if (targets.empty()) throw ShapeError("dataset must contain at least one sample");
  if (inputs.rows() != targets.size()) {
    throw ShapeError("dataset has " + std::to_string(inputs.rows()) + " input rows but " +
                     std::to_string(targets.size()) + " targets");
  }
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= num_classes) {
      throw ShapeError("target " + std::to_string(targets[i]) + " at row " + std::to_string(i) +
                       " outside [0, " + std::to_string(num_classes) + ")");
    }
  }
  return Dataset{std::move(inputs), std::move(targets), num_classes};
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Tensor x = Tensor::matrix(indices.size(), dim());
  std::vector<int> t;
  t.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    std::ranges::copy(inputs.row(indices[i]), x.row(i).begin());
    t.push_back(targets[indices[i]]);
  }
  return make(std::move(x), std::move(t), num_classes);
}

// ---------------------------------------------------------------------------
// Forward / backward

namespace {

void check_input_width(const Mlp& model, std::size_t width) {
  if (width != model.input_dim()) {
    throw ShapeError("layer 0: expected input width " + std::to_string(model.input_dim()) + ", got " +
                     std::to_string(width));
  }
}

double activate(Activation a, double z) noexcept {
  return a == Activation::relu ? std::max(z, 0.0) : z;
}

double activation_slope(Activation a, double z) noexcept {
  if (a == Activation::relu) return z > 0.0 ? 1.0 : 0.0;
  return 1.0;
}

void affine(const DenseLayer& layer, std::span<const double> in, std::vector<double>& out) {
  const std::size_t rows = layer.out();
  const std::size_t cols = layer.in();
  out.resize(rows);
  const double* w = layer.weight.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = layer.bias[r];
    const double* wr = w + r * cols;
    for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * in[c];
    out[r] = acc;
  }
}

// log-sum-exp stabilised cross-entropy; writes softmax into `probs`.
double softmax_cross_entropy(std::span<const double> logits, int target, std::vector<double>& probs) {
  const double m = *std::ranges::max_element(logits);
  probs.resize(logits.size());
  double sum = 0.0;
  for (std::size_t c = 0; c < logits.size(); ++c) {
    probs[c] = std::exp(logits[c] - m);
    sum += probs[c];
  }
  for (auto& p : probs) p /= sum;
  return std::log(sum) + m - logits[static_cast<std::size_t>(target)];
}

}  // namespace

std::size_t argmax(std::span<const double> values) noexcept {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

ForwardCache forward_sample(const Mlp& model, std::span<const double> input) {
  check_input_width(model, input.size());
  const auto& layers = model.layers();
  ForwardCache cache;
  cache.post.reserve(layers.size() + 1);
  cache.pre.resize(layers.size());
  cache.post.emplace_back(input.begin(), input.end());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    affine(layers[l], cache.post.back(), cache.pre[l]);
    std::vector<double> a(cache.pre[l].size());
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = activate(layers[l].activation, cache.pre[l][i]);
    cache.post.push_back(std::move(a));
  }
  return cache;
}

void backward_sample(const Mlp& model, const ForwardCache& cache, std::span<const double> cotangent,
                     std::span<double> grad, double scale) {
  const auto& layers = model.layers();
  // Parameter offset of each layer's weight block.
  std::vector<std::size_t> offset(layers.size());
  std::size_t running = 0;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    offset[l] = running;
    running += layers[l].parameter_count();
  }

  std::vector<double> delta(cotangent.begin(), cotangent.end());
  for (std::size_t l = layers.size(); l-- > 0;) {
    const auto& layer = layers[l];
    for (std::size_t r = 0; r < delta.size(); ++r) delta[r] *= activation_slope(layer.activation, cache.pre[l][r]);

    const std::size_t rows = layer.out();
    const std::size_t cols = layer.in();
    const auto& a_in = cache.post[l];
    double* gw = grad.data() + offset[l];
    double* gb = gw + rows * cols;
    for (std::size_t r = 0; r < rows; ++r) {
      const double d = scale * delta[r];
      if (d == 0.0) continue;
      for (std::size_t c = 0; c < cols; ++c) gw[r * cols + c] += d * a_in[c];
      gb[r] += d;
    }
    if (l == 0) break;
    std::vector<double> prev(cols, 0.0);
    const double* w = layer.weight.data().data();
    for (std::size_t r = 0; r < rows; ++r) {
      const double d = delta[r];
      if (d == 0.0) continue;
      for (std::size_t c = 0; c < cols; ++c) prev[c] += w[r * cols + c] * d;
    }
    delta = std::move(prev);
  }
}

Tensor forward(const Mlp& model, const Tensor& inputs) {
  if (inputs.rank() != 2) throw ShapeError("forward expects [n x d] inputs, got " + inputs.shape_string());
  check_input_width(model, inputs.cols());
  const auto& layers = model.layers();
  Tensor logits = Tensor::matrix(inputs.rows(), model.output_dim());
  std::vector<double> a, z;
  for (std::size_t i = 0; i < inputs.rows(); ++i) {
    const auto x = inputs.row(i);
    a.assign(x.begin(), x.end());
    for (const auto& layer : layers) {
      affine(layer, a, z);
      for (auto& v : z) v = activate(layer.activation, v);
      std::swap(a, z);
    }
    std::ranges::copy(a, logits.row(i).begin());
  }
  return logits;
}

LossGrad loss_and_grads(const Mlp& model, const Dataset& data, std::span<const std::size_t> indices) {
  if (indices.empty()) throw ShapeError("loss_and_grads: empty batch");
  LossGrad out;
  out.grads.assign(model.parameter_count(), 0.0);
  const double scale = 1.0 / static_cast<double>(indices.size());
  std::vector<double> probs;
  double loss_sum = 0.0;
  for (std::size_t idx : indices) {
    const auto cache = forward_sample(model, data.inputs.row(idx));
    const int target = data.targets[idx];
    loss_sum += softmax_cross_entropy(cache.logits(), target, probs);
    if (argmax(cache.logits()) == static_cast<std::size_t>(target)) ++out.correct;
    probs[static_cast<std::size_t>(target)] -= 1.0;
    backward_sample(model, cache, probs, out.grads, scale);
  }
  out.loss = loss_sum * scale;
  return out;
}

LossGrad loss_and_grads(const Mlp& model, const Dataset& batch) {
  std::vector<std::size_t> all(batch.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return loss_and_grads(model, batch, all);
}

double mean_loss(const Mlp& model, const Dataset& data) {
  const Tensor logits = forward(model, data.inputs);
  std::vector<double> probs;
  double sum = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) sum += softmax_cross_entropy(logits.row(i), data.targets[i], probs);
  return sum / static_cast<double>(data.size());
}

LossAccuracy evaluate(const Mlp& model, const Dataset& data) {
  const Tensor logits = forward(model, data.inputs);
  std::vector<double> probs;
  double sum = 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    sum += softmax_cross_entropy(logits.row(i), data.targets[i], probs);
    if (argmax(logits.row(i)) == static_cast<std::size_t>(data.targets[i])) ++correct;
  }
  const double n = static_cast<double>(data.size());
  return LossAccuracy{sum / n, static_cast<double>(correct) / n};
}

double accuracy(const Mlp& model, const Dataset& data) {
  if (data.size() == 0) throw ShapeError("accuracy on empty dataset");
  const Tensor logits = forward(model, data.inputs);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (argmax(logits.row(i)) == static_cast<std::size_t>(data.targets[i])) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

// ---------------------------------------------------------------------------
// Optimisation

void sgd_update(std::span<double> params, std::span<const double> grads, double lr, double momentum,
                SgdState& state) {
  if (!(lr >= 0.0)) throw Error("sgd: learning rate must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw Error("sgd: momentum must lie in [0, 1)");
  if (grads.size() != params.size()) {
    throw ShapeError("sgd: " + std::to_string(grads.size()) + " gradients for " + std::to_string(params.size()) +
                     " parameters");
  }
  if (!std::ranges::all_of(grads, [](double g) { return std::isfinite(g); })) {
    throw NumericError("sgd: non-finite gradient");
  }
  if (state.velocity.size() != params.size()) state.velocity.assign(params.size(), 0.0);
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.velocity[i] = momentum * state.velocity[i] + grads[i];
    params[i] -= lr * state.velocity[i];
  }
}

void sgd_step(Mlp& model, std::span<const double> grads, double lr, double momentum, SgdState& state) {
  ParamVector params = model.flatten();
  sgd_update(params, grads, lr, momentum, state);
  model.assign(params);
}

TrainResult train(const Mlp& initial, const Dataset& data, const TrainConfig& cfg, const GradientPointHook& hook) {
  if (cfg.epochs < 1) throw Error("train: epochs must be >= 1");
  if (cfg.batch_size < 1) throw Error("train: batch_size must be >= 1");
  check_input_width(initial, data.dim());

  TrainResult result{initial, {}};
  Mlp& model = result.model;
  SgdState state;
  Rng shuffle_rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t step = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle_rng.uniform_index(i)]);
    }
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      const std::span<const std::size_t> batch(order.data() + start, stop - start);

      LossGrad lg;
      if (hook) {
        ParamVector point = model.flatten();
        hook(point, step);
        lg = loss_and_grads(model.with_parameters(point), data, batch);
      } else {
        lg = loss_and_grads(model, data, batch);
      }
      if (!std::isfinite(lg.loss) || !std::ranges::all_of(lg.grads, [](double g) { return std::isfinite(g); })) {
        throw NumericError("training diverged at epoch " + std::to_string(epoch + 1));
      }
      epoch_loss += lg.loss * static_cast<double>(batch.size());
      sgd_step(model, lg.grads, cfg.lr, cfg.momentum, state);
      ++step;
    }
    result.loss_history.push_back(epoch_loss / static_cast<double>(order.size()));
  }
  if (!Tensor({model.parameter_count()}, model.flatten()).all_finite()) {
    throw NumericError("training diverged at epoch " + std::to_string(cfg.epochs));
  }
  return result;
}

}  // namespace cimrel
